"""Debug rendering of what the driver display would show: zone outline and
detection boxes drawn over the frame (or a grey canvas when replay frames
carry no pixels)."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .alert import Zone, in_zone
from .geometry import Detection

ZONE_COLOR = (255, 210, 0)
BOX_COLOR = (0, 200, 0)
ALERT_COLOR = (230, 0, 0)
CANVAS_GREY = 96

Point = Tuple[float, float]


def _draw_segment(img: np.ndarray, p: Point, q: Point, color) -> None:
    h, w = img.shape[:2]
    steps = int(max(abs(q[0] - p[0]), abs(q[1] - p[1]))) + 1
    t = np.linspace(0.0, 1.0, steps + 1)
    xs = np.clip(np.round(p[0] + t * (q[0] - p[0])).astype(int), 0, w - 1)
    ys = np.clip(np.round(p[1] + t * (q[1] - p[1])).astype(int), 0, h - 1)
    img[ys, xs] = color


def draw_polyline(img: np.ndarray, points_px: Sequence[Point], color, closed: bool = True) -> None:
    pts = list(points_px)
    pairs = zip(pts, pts[1:] + pts[:1]) if closed else zip(pts, pts[1:])
    for p, q in pairs:
        _draw_segment(img, p, q, color)


def render_overlay(
    width: int,
    height: int,
    zone: Zone,
    dets: Sequence[Detection],
    alerting: bool,
    pixels: Optional[np.ndarray] = None,
) -> np.ndarray:
    """RGB uint8 frame with the zone outline and normalized detections drawn on.

    In-zone detections turn red while the alert is active.
    """
    if pixels is not None:
        img = np.array(pixels, dtype=np.uint8, copy=True)
    else:
        img = np.full((height, width, 3), CANVAS_GREY, dtype=np.uint8)
    # pixel centres sit at integer coordinates, so the far edge maps to size - 1
    sx, sy = width - 1, height - 1
    draw_polyline(img, [(u * sx, v * sy) for u, v in zone.polygon], ZONE_COLOR)
    for det in dets:
        b = det.box
        corners = [(b.x_min * sx, b.y_min * sy), (b.x_max * sx, b.y_min * sy),
                   (b.x_max * sx, b.y_max * sy), (b.x_min * sx, b.y_max * sy)]
        color = ALERT_COLOR if alerting and in_zone(det, zone) else BOX_COLOR
        draw_polyline(img, corners, color)
    return img
