"""Box geometry shared by every stage, from IoU up to greedy NMS.

Boxes are continuous rectangles ``(x_min, y_min, x_max, y_max)``; there is no
``+1`` pixel widening.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

CYCLIST = 0


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    normalized: bool = False

    def __post_init__(self) -> None:
        # numpy scalars would otherwise leak their repr into text reports
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(
                f"inverted box: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @classmethod
    def from_seq(cls, xyxy: Sequence[float], normalized: bool = False) -> "BoundingBox":
        x0, y0, x1, y1 = (float(v) for v in xyxy)
        return cls(x0, y0, x1, y1, normalized)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    @property
    def bottom_center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, self.y_max

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def scaled(self, sx: float, sy: float, normalized: bool) -> "BoundingBox":
        return BoundingBox(
            self.x_min * sx, self.y_min * sy, self.x_max * sx, self.y_max * sy, normalized
        )

    def to_normalized(self, width: float, height: float) -> "BoundingBox":
        if self.normalized:
            return self
        return self.scaled(1.0 / width, 1.0 / height, True)

    def to_pixels(self, width: float, height: float) -> "BoundingBox":
        if not self.normalized:
            return self
        return self.scaled(width, height, False)

    def clipped(self, x_lo: float, y_lo: float, x_hi: float, y_hi: float) -> "BoundingBox":
        """Clamp every coordinate into the window; an outside box collapses onto its edge."""
        x0 = min(max(self.x_min, x_lo), x_hi)
        x1 = min(max(self.x_max, x_lo), x_hi)
        y0 = min(max(self.y_min, y_lo), y_hi)
        y1 = min(max(self.y_max, y_lo), y_hi)
        return BoundingBox(x0, y0, x1, y1, self.normalized)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    class_id: int = CYCLIST

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score outside [0, 1]: {self.score}")


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when both boxes are degenerate (zero union)."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, inter / union)


def filter_by_score(dets: Iterable[Detection], min_score: float) -> List[Detection]:
    if not 0.0 <= min_score <= 1.0:
        raise ValueError(f"min_score outside [0, 1]: {min_score}")
    return [d for d in dets if d.score >= min_score]


def score_order(dets: Sequence[Detection]) -> List[int]:
    """Indices sorted by descending score, equal scores kept in input order."""
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[Detection]:
    """Greedy non-maximum suppression.

    A detection survives iff its IoU with every already-kept detection is
    strictly below ``iou_threshold``. Output is in descending score order.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold outside (0, 1]: {iou_threshold}")
    kept: List[Detection] = []
    for i in score_order(dets):
        cand = dets[i]
        if all(iou(cand.box, k.box) < iou_threshold for k in kept):
            kept.append(cand)
    return kept
