"""COCO-style single-class detection metrics.

Detections are matched greedily in score order to the best unmatched ground
truth. AP uses 101-point interpolation of the precision envelope, and mAP
averages it over IoU thresholds 0.50:0.05:0.95.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .geometry import BoundingBox, Detection, iou, score_order

IOU_THRESHOLDS: Tuple[float, ...] = tuple(t / 100 for t in range(50, 100, 5))
RECALL_POINTS: Tuple[float, ...] = tuple(r / 100 for r in range(101))


@dataclass(frozen=True)
class MatchResult:
    """Per-detection TP flags in the caller's detection order."""

    tp: Tuple[bool, ...]
    num_gt: int
    matched_gt: Tuple[Optional[int], ...] = ()

    @property
    def tp_count(self) -> int:
        return sum(self.tp)

    @property
    def fp_count(self) -> int:
        return len(self.tp) - self.tp_count

    @property
    def fn_count(self) -> int:
        return self.num_gt - self.tp_count


@dataclass
class MetricsBundle:
    ap_per_threshold: Dict[float, float]
    map_coco: float
    ap50: float
    ap75: float
    pr_curves: Dict[float, List[Tuple[float, float]]] = field(default_factory=dict)
    num_images: int = 0
    num_gt: int = 0
    num_detections: int = 0
    empty_dataset: bool = False
    empty_detections: bool = False

    def report_lines(self) -> List[str]:
        lines = [
            f"images={self.num_images}",
            f"ground_truths={self.num_gt}",
            f"detections={self.num_detections}",
            f"empty_dataset={str(self.empty_dataset).lower()}",
            f"empty_detections={str(self.empty_detections).lower()}",
            f"map_coco={self.map_coco!r}",
            f"ap50={self.ap50!r}",
            f"ap75={self.ap75!r}",
        ]
        lines += [f"ap@{t:.2f}={ap!r}" for t, ap in sorted(self.ap_per_threshold.items())]
        return lines

    def write(self, directory: str | Path, curves: bool = True, name: str = "metrics.txt") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / name).write_text("\n".join(self.report_lines()) + "\n")
        if curves:
            for t, curve in sorted(self.pr_curves.items()):
                rows = ["recall,precision"] + [f"{r!r},{p!r}" for r, p in curve]
                (directory / f"pr_{int(round(t * 100)):02d}.csv").write_text("\n".join(rows) + "\n")


def match_detections(
    dets: Sequence[Detection], gts: Sequence[BoundingBox], iou_threshold: float
) -> MatchResult:
    """Match one image's detections to its ground truth.

    Detections are visited by descending score (ties by index); each takes the
    unmatched ground truth with the highest IoU (ties to the lower gt index)
    when that IoU reaches ``iou_threshold``.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold outside (0, 1]: {iou_threshold}")
    taken = [False] * len(gts)
    tp = [False] * len(dets)
    matched: List[Optional[int]] = [None] * len(dets)
    for d in score_order(dets):
        best, best_iou = -1, iou_threshold
        for g, gt in enumerate(gts):
            if taken[g]:
                continue
            v = iou(dets[d].box, gt)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = g, v
        if best >= 0:
            taken[best] = True
            tp[d] = True
            matched[d] = best
    return MatchResult(tuple(tp), len(gts), tuple(matched))


def pr_curve(flags: Sequence[bool], total_gt: int) -> List[Tuple[float, float]]:
    """Raw cumulative (recall, precision) after each detection of a score-sorted
    flag list. Recall stays 0 when there is no ground truth."""
    if total_gt < 0:
        raise ValueError("total_gt must be >= 0")
    curve = []
    tp = 0
    for n, flag in enumerate(flags, start=1):
        tp += bool(flag)
        recall = tp / total_gt if total_gt else 0.0
        curve.append((recall, tp / n))
    return curve


def precision_envelope(curve: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Right-to-left running maximum so precision never rises with recall."""
    out = list(curve)
    best = 0.0
    for i in range(len(out) - 1, -1, -1):
        best = max(best, out[i][1])
        out[i] = (out[i][0], best)
    return out


def interpolated_precision(curve: Sequence[Tuple[float, float]], recall: float) -> float:
    """Best precision among curve points whose recall reaches ``recall``; 0 if none."""
    return max((p for r, p in curve if r >= recall), default=0.0)


def average_precision(curve: Sequence[Tuple[float, float]], total_gt: Optional[int] = None) -> float:
    """Mean interpolated precision at recall 0.00, 0.01, ..., 1.00."""
    if not curve or total_gt == 0:
        return 0.0
    env = precision_envelope(curve)
    total = 0.0
    j = 0
    for r in RECALL_POINTS:
        # recall is non-decreasing along the curve; advance to the first point reaching r
        while j < len(env) and env[j][0] < r:
            j += 1
        if j == len(env):
            break
        total += env[j][1]
    return total / len(RECALL_POINTS)


def coco_map(
    per_image: Sequence[Tuple[Sequence[Detection], Sequence[BoundingBox]]],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> MetricsBundle:
    """Dataset-level metrics; detections are pooled across images by score,
    ties broken by (image position, detection index)."""
    num_gt = sum(len(g) for _, g in per_image)
    num_det = sum(len(d) for d, _ in per_image)
    if not per_image:
        zeros = {t: 0.0 for t in thresholds}
        return MetricsBundle(zeros, 0.0, 0.0, 0.0, {t: [] for t in thresholds},
                             empty_dataset=True, empty_detections=True)

    order = sorted(
        ((img, d) for img, (dets, _) in enumerate(per_image) for d in range(len(dets))),
        key=lambda k: (-per_image[k[0]][0][k[1]].score, k[0], k[1]),
    )
    aps: Dict[float, float] = {}
    curves: Dict[float, List[Tuple[float, float]]] = {}
    for t in thresholds:
        matches = [match_detections(dets, gts, t) for dets, gts in per_image]
        flags = [matches[img].tp[d] for img, d in order]
        curve = pr_curve(flags, num_gt)
        curves[t] = curve
        aps[t] = average_precision(curve, num_gt)
    map_coco = sum(aps.values()) / len(aps)
    return MetricsBundle(
        aps,
        map_coco,
        aps.get(0.5, 0.0),
        aps.get(0.75, 0.0),
        curves,
        num_images=len(per_image),
        num_gt=num_gt,
        num_detections=num_det,
        empty_dataset=False,
        empty_detections=num_det == 0,
    )


def read_detections_file(path: str | Path) -> Dict[str, List[Detection]]:
    """Read ``image_id, x_min, y_min, x_max, y_max, score`` records (pixel units)."""
    out: Dict[str, List[Detection]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            box = BoundingBox.from_seq([float(v) for v in parts[1:5]])
            det = Detection(box, float(parts[5]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        out.setdefault(parts[0], []).append(det)
    return out


def write_detections_file(path: str | Path, dets: Dict[str, Sequence[Detection]]) -> None:
    lines = ["# image_id,x_min,y_min,x_max,y_max,score"]
    for image_id in sorted(dets):
        for d in dets[image_id]:
            b = d.box
            lines.append(f"{image_id},{b.x_min!r},{b.y_min!r},{b.x_max!r},{b.y_max!r},{d.score!r}")
    Path(path).write_text("\n".join(lines) + "\n")
