"""Pascal VOC annotation handling for the single-class cyclist dataset."""

from __future__ import annotations

import logging
import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .geometry import BoundingBox

log = logging.getLogger(__name__)

CYCLIST_NAMES = ("cyclist",)


class ParseError(ValueError):
    """Raised for malformed or semantically invalid VOC markup."""


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: int
    height: int
    boxes: Tuple[BoundingBox, ...] = ()
    filename: str = ""
    skipped_count: int = 0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"non-positive image size {self.width}x{self.height}")
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not self.filename:
            object.__setattr__(self, "filename", f"{self.image_id}.ppm")


@dataclass
class DatasetSummary:
    image_count: int
    instance_count: int
    heatmap: np.ndarray
    histogram: Dict[int, int] = field(default_factory=dict)


def _int_field(node: ET.Element, tag: str, where: str) -> int:
    text = node.findtext(tag)
    if text is None:
        raise ParseError(f"{where}: missing <{tag}>")
    try:
        return int(round(float(text.strip())))
    except ValueError:
        raise ParseError(f"{where}: <{tag}> is not a number: {text!r}") from None


def _float_field(node: ET.Element, tag: str, where: str) -> float:
    text = node.findtext(tag)
    if text is None:
        raise ParseError(f"{where}: missing <{tag}>")
    try:
        return float(text.strip())
    except ValueError:
        raise ParseError(f"{where}: <{tag}> is not a number: {text!r}") from None


def parse_voc(
    xml_text: bytes | str,
    image_id: str | None = None,
    class_names: Sequence[str] = CYCLIST_NAMES,
) -> ImageAnnotation:
    """Parse one VOC annotation document.

    Objects whose name is not a cyclist label are skipped and counted in
    ``skipped_count``. Box coordinates are clipped to the image bounds.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed markup at line {line}, column {col}: {exc}") from None

    size = root.find("size")
    if size is None:
        raise ParseError("missing <size> element")
    width = _int_field(size, "width", "<size>")
    height = _int_field(size, "height", "<size>")
    if width <= 0 or height <= 0:
        raise ParseError(f"image size must be positive, got {width}x{height}")

    filename = (root.findtext("filename") or "").strip()
    if image_id is None:
        image_id = Path(filename).stem if filename else ""

    wanted = {n.lower() for n in class_names}
    boxes: List[BoundingBox] = []
    skipped = 0
    for k, obj in enumerate(root.iter("object")):
        name = (obj.findtext("name") or "").strip().lower()
        if name not in wanted:
            skipped += 1
            continue
        bnd = obj.find("bndbox")
        where = f"object #{k}"
        if bnd is None:
            raise ParseError(f"{where}: missing <bndbox>")
        x0 = _float_field(bnd, "xmin", where)
        y0 = _float_field(bnd, "ymin", where)
        x1 = _float_field(bnd, "xmax", where)
        y1 = _float_field(bnd, "ymax", where)
        x0, x1 = sorted((x0, x1))
        y0, y1 = sorted((y0, y1))
        boxes.append(BoundingBox(x0, y0, x1, y1).clipped(0.0, 0.0, width, height))
    if skipped:
        log.warning("%s: skipped %d non-cyclist object(s)", image_id or "<annotation>", skipped)
    return ImageAnnotation(image_id, width, height, tuple(boxes), filename, skipped)


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def serialize_voc(annot: ImageAnnotation, class_name: str = CYCLIST_NAMES[0]) -> bytes:
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = annot.filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(annot.width)
    ET.SubElement(size, "height").text = str(annot.height)
    ET.SubElement(size, "depth").text = "3"
    for box in annot.boxes:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = class_name
        ET.SubElement(obj, "difficult").text = "0"
        bnd = ET.SubElement(obj, "bndbox")
        for tag, v in zip(("xmin", "ymin", "xmax", "ymax"), box.as_tuple()):
            ET.SubElement(bnd, tag).text = _num(v)
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8") + b"\n"


def load_voc_dir(directory: str | Path) -> List[ImageAnnotation]:
    """Parse every ``*.xml`` in ``directory``, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    out = []
    for path in sorted(directory.glob("*.xml")):
        try:
            out.append(parse_voc(path.read_bytes(), image_id=path.stem))
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return out


def write_voc_dir(directory: str | Path, items: Iterable[ImageAnnotation]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for annot in items:
        (directory / f"{annot.image_id}.xml").write_bytes(serialize_voc(annot))


def split_dataset(
    items: Sequence, train_fraction: float, seed: int
) -> Tuple[list, list]:
    """Seeded shuffle then cut; the train side gets ``round(train_fraction * N)``
    items, rounding halves up."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    n_train = int(math.floor(train_fraction * len(items) + 0.5))
    train = [items[i] for i in order[:n_train]]
    val = [items[i] for i in order[n_train:]]
    return train, val


def _cell(coord: float, grid: int) -> int:
    # half-open cells [k/g, (k+1)/g); the far edge folds into the last cell
    return min(max(int(math.floor(coord * grid)), 0), grid - 1)


def summarize(items: Iterable[ImageAnnotation], grid: int = 10) -> DatasetSummary:
    """Heatmap of normalized box centers (row = y cell, column = x cell) and the
    boxes-per-image histogram."""
    if grid < 1:
        raise ValueError(f"grid must be >= 1, got {grid}")
    heat = np.zeros((grid, grid), dtype=np.int64)
    hist: Dict[int, int] = {}
    images = instances = 0
    for annot in items:
        images += 1
        instances += len(annot.boxes)
        hist[len(annot.boxes)] = hist.get(len(annot.boxes), 0) + 1
        for box in annot.boxes:
            cx, cy = box.center
            heat[_cell(cy / annot.height, grid), _cell(cx / annot.width, grid)] += 1
    return DatasetSummary(images, instances, heat, dict(sorted(hist.items())))


def write_summary(summary: DatasetSummary, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = summary.heatmap.shape[0]
    (directory / "summary.txt").write_text(
        f"image_count={summary.image_count}\n"
        f"instance_count={summary.instance_count}\n"
        f"grid={grid}\n"
    )
    rows = [",".join(str(int(v)) for v in row) for row in summary.heatmap]
    (directory / "heatmap.csv").write_text("\n".join(rows) + "\n")
    lines = ["instances_per_image,image_count"]
    lines += [f"{k},{v}" for k, v in sorted(summary.histogram.items())]
    (directory / "histogram.csv").write_text("\n".join(lines) + "\n")
