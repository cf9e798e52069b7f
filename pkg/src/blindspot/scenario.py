"""Synthetic right-hook test scene: a cyclist riding a straight line beside a
stationary truck, seen by a pinhole camera at each of the three placements.

World frame (feet): x forward along the truck, y to the truck's left, z up.
The truck's right side is the plane y = 0, its cab front at x = 0 and its
rear at x = -truck_length. The cyclist rides in +x at y = -lateral_offset.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BoundingBox, Detection

PLACEMENTS = ("A", "B", "C")
PLACEMENT_TAGS = {"A": "A_front_mirror", "B": "B_above", "C": "C_rear"}

CYCLIST_HEIGHT_FT = 6.0
CYCLIST_WIDTH_FT = 2.0
LANE_HALF_WIDTH_FT = 3.0
NEAR_PLANE_FT = 0.5


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every offending field."""

    def __init__(self, problems: Sequence[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; ``yaw_deg`` is the heading (0 = +x, 90 = +y) and
    ``pitch_deg`` tilts the optical axis downward."""

    x: float
    y: float
    z: float
    yaw_deg: float
    pitch_deg: float
    hfov_deg: float = 60.0
    width: int = 640
    height: int = 480

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    def basis(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, down, forward) unit vectors in world coordinates."""
        yaw = math.radians(self.yaw_deg)
        pitch = math.radians(self.pitch_deg)
        forward = np.array([
            math.cos(pitch) * math.cos(yaw),
            math.cos(pitch) * math.sin(yaw),
            -math.sin(pitch),
        ])
        right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
        down = np.cross(forward, right)
        return right, down, forward

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points (N, 3) -> camera coordinates (N, 3) as (right, down, depth)."""
        right, down, forward = self.basis()
        rel = np.asarray(points, dtype=np.float64) - np.array([self.x, self.y, self.z])
        return np.stack([rel @ right, rel @ down, rel @ forward], axis=-1)

    def project_camera(self, cam_pts: np.ndarray) -> np.ndarray:
        """Camera coordinates with positive depth -> normalized image coordinates."""
        f = self.focal_px
        u = (f * cam_pts[:, 0] / cam_pts[:, 2] + self.width / 2.0) / self.width
        v = (f * cam_pts[:, 1] / cam_pts[:, 2] + self.height / 2.0) / self.height
        return np.stack([u, v], axis=-1)


@dataclass(frozen=True)
class ScenarioConfig:
    truck_length: float = 80.0
    truck_height: float = 13.0
    height_a: float = 5.0
    height_b: float = 13.0
    height_c: float = 13.0
    cyclist_speed: float = 15.0
    cyclist_lateral_offset: float = 6.0
    cyclist_start_x: float = -100.0
    frame_rate: float = 30.0
    duration: float = 8.0
    hfov_deg: float = 60.0
    image_width: int = 640
    image_height: int = 480
    pitch_a: float = 15.0
    pitch_b: float = 45.0
    pitch_c: float = 15.0
    min_box_px: float = 16.0

    def validate(self) -> "ScenarioConfig":
        problems = []
        positive = (
            "truck_length", "truck_height", "height_a", "height_b", "height_c",
            "cyclist_speed", "cyclist_lateral_offset", "frame_rate", "duration",
            "image_width", "image_height",
        )
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                problems.append(f"scenario.{name}: must be a positive number, got {v!r}")
        if not 0 < self.hfov_deg < 180:
            problems.append(f"scenario.hfov_deg: must be in (0, 180), got {self.hfov_deg!r}")
        if self.min_box_px < 0:
            problems.append(f"scenario.min_box_px: must be >= 0, got {self.min_box_px!r}")
        for name in ("pitch_a", "pitch_b", "pitch_c"):
            if not -90 <= getattr(self, name) <= 90:
                problems.append(f"scenario.{name}: must be in [-90, 90]")
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def num_frames(self) -> int:
        return int(math.floor(self.duration * self.frame_rate + 1e-9))

    def camera(self, placement: str) -> Camera:
        """A faces rearward from the right mirror; B looks forward and down from
        the roof edge mid-trailer; C looks forward from the trailer's rear."""
        common = dict(hfov_deg=self.hfov_deg, width=self.image_width, height=self.image_height)
        if placement == "A":
            return Camera(0.0, 0.0, self.height_a, 180.0, self.pitch_a, **common)
        if placement == "B":
            return Camera(-self.truck_length / 2.0, 0.0, self.height_b, 0.0, self.pitch_b, **common)
        if placement == "C":
            return Camera(-self.truck_length, 0.0, self.height_c, 0.0, self.pitch_c, **common)
        raise ConfigError(f"unknown placement {placement!r}; expected one of {PLACEMENTS}")

    def cyclist_x(self, frame: int) -> float:
        return self.cyclist_start_x + self.cyclist_speed * frame / self.frame_rate


def load_scenario_config(path: str | Path | None = None, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Read the ``[scenario]`` section of an INI-style file."""
    values: Dict[str, object] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if not parser.read(path):
            raise ConfigError(f"cannot read scenario config {path}")
        if parser.has_section("scenario"):
            values.update(parser["scenario"])
    values.update(overrides or {})
    return scenario_from_mapping(values)


def scenario_from_mapping(values: dict) -> ScenarioConfig:
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    kwargs = {}
    problems = []
    for key, raw in values.items():
        if key not in types:
            problems.append(f"scenario.{key}: unknown field")
            continue
        cast = int if types[key] in ("int", int) else float
        try:
            kwargs[key] = cast(raw)
        except (TypeError, ValueError):
            problems.append(f"scenario.{key}: not a number: {raw!r}")
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(**kwargs).validate()


# -- projection -----------------------------------------------------------

def clip_polygon_near(cam_pts: np.ndarray, near: float = NEAR_PLANE_FT) -> np.ndarray:
    """Sutherland-Hodgman clip of a camera-space polygon against depth >= near."""
    out = []
    n = len(cam_pts)
    for i in range(n):
        cur, nxt = cam_pts[i], cam_pts[(i + 1) % n]
        cur_in, nxt_in = cur[2] >= near, nxt[2] >= near
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (near - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + t * (nxt - cur))
    return np.array(out).reshape(-1, 3)


def cyclist_corners(x: float, lateral_offset: float) -> np.ndarray:
    """Upright planar rectangle facing the direction of travel."""
    y0 = -lateral_offset - CYCLIST_WIDTH_FT / 2.0
    y1 = -lateral_offset + CYCLIST_WIDTH_FT / 2.0
    return np.array([
        [x, y0, 0.0],
        [x, y1, 0.0],
        [x, y1, CYCLIST_HEIGHT_FT],
        [x, y0, CYCLIST_HEIGHT_FT],
    ])


def project_box(
    camera: Camera, corners: np.ndarray, min_box_px: float = 0.0
) -> Optional[BoundingBox]:
    """Normalized image box of a world polygon, or ``None`` when not visible.

    The polygon is clipped to the near plane and the image, and is treated as
    invisible when the clipped box is thinner than ``min_box_px`` pixels.
    """
    cam = clip_polygon_near(camera.to_camera(corners))
    if len(cam) < 3:
        return None
    uv = camera.project_camera(cam)
    u0, v0 = uv.min(axis=0)
    u1, v1 = uv.max(axis=0)
    if u1 <= 0 or v1 <= 0 or u0 >= 1 or v0 >= 1:
        return None
    box = BoundingBox(float(u0), float(v0), float(u1), float(v1), True).clipped(0.0, 0.0, 1.0, 1.0)
    if box.width * camera.width < max(min_box_px, 1e-9) or box.height * camera.height < max(min_box_px, 1e-9):
        return None
    return box


@dataclass
class SyntheticTrack:
    config: ScenarioConfig
    cyclist_x: List[float]
    boxes: Dict[str, List[Optional[BoundingBox]]] = field(default_factory=dict)

    @property
    def num_frames(self) -> int:
        return len(self.cyclist_x)

    def visible(self, placement: str) -> List[bool]:
        return [b is not None for b in self.boxes[placement]]


def generate_track(cfg: ScenarioConfig) -> SyntheticTrack:
    cfg.validate()
    xs = [cfg.cyclist_x(i) for i in range(cfg.num_frames)]
    boxes = {}
    for p in PLACEMENTS:
        cam = cfg.camera(p)
        boxes[p] = [
            project_box(cam, cyclist_corners(x, cfg.cyclist_lateral_offset), cfg.min_box_px)
            for x in xs
        ]
    return SyntheticTrack(cfg, xs, boxes)


def clip_polygon_unit_square(poly: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Sutherland-Hodgman clip of a 2-D polygon to [0, 1] x [0, 1]."""
    out = list(poly)
    for axis, bound, keep_low in ((0, 0.0, False), (0, 1.0, True), (1, 0.0, False), (1, 1.0, True)):
        src, out = out, []
        if not src:
            break
        for i, cur in enumerate(src):
            nxt = src[(i + 1) % len(src)]
            cur_in = cur[axis] <= bound if keep_low else cur[axis] >= bound
            nxt_in = nxt[axis] <= bound if keep_low else nxt[axis] >= bound
            if cur_in:
                out.append(cur)
            if cur_in != nxt_in:
                t = (bound - cur[axis]) / (nxt[axis] - cur[axis])
                pt = [cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]
                pt[axis] = bound
                out.append((pt[0], pt[1]))
    return out


def lane_band_hull(cfg: ScenarioConfig, placement: str) -> List[Tuple[float, float]]:
    """Visible part of the cyclist lane's ground band in normalized image space.

    The band spans ``lateral_offset +/- 3 ft`` from the truck side and
    ``[-2 L, L]`` along it (L = truck length). After near-plane clipping the
    band is projected, then cut to the unit square before taking the hull.
    """
    cam = cfg.camera(placement)
    y_in = -cfg.cyclist_lateral_offset + LANE_HALF_WIDTH_FT
    y_out = -cfg.cyclist_lateral_offset - LANE_HALF_WIDTH_FT
    x_lo, x_hi = -2.0 * cfg.truck_length, cfg.truck_length
    band = np.array([[x_lo, y_out, 0.0], [x_hi, y_out, 0.0], [x_hi, y_in, 0.0], [x_lo, y_in, 0.0]])
    cam_pts = clip_polygon_near(cam.to_camera(band))
    if len(cam_pts) < 3:
        return []
    uv = [(float(u), float(v)) for u, v in cam.project_camera(cam_pts)]
    return convex_hull(clip_polygon_unit_square(uv))


def convex_hull(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Andrew's monotone chain; collinear points are dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[Tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


# -- replay export --------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    jitter_px: float = 0.0
    drop_rate: float = 0.0
    score_model: str = "constant:1.0"

    def validate(self) -> "NoiseModel":
        problems = []
        if self.jitter_px < 0:
            problems.append(f"noise.jitter_px: must be >= 0, got {self.jitter_px!r}")
        if not 0.0 <= self.drop_rate <= 1.0:
            problems.append(f"noise.drop_rate: must be in [0, 1], got {self.drop_rate!r}")
        try:
            _score_sampler(self.score_model)
        except ValueError as exc:
            problems.append(f"noise.score_model: {exc}")
        if problems:
            raise ConfigError(problems)
        return self


def _score_sampler(model: str):
    kind, _, rest = model.partition(":")
    args = [float(a) for a in rest.split(":") if a] if rest else []
    if kind == "constant" and len(args) == 1 and 0 <= args[0] <= 1:
        value = args[0]
        return lambda rng: value
    if kind == "uniform" and len(args) == 2 and 0 <= args[0] <= args[1] <= 1:
        lo, hi = args
        return lambda rng: float(rng.uniform(lo, hi))
    raise ValueError(f"expected 'constant:<s>' or 'uniform:<lo>:<hi>' within [0, 1], got {model!r}")


def export_replay(track: SyntheticTrack, placement: str, noise: NoiseModel = NoiseModel(), seed: int = 0):
    """Turn one placement's ground truth into a replay backend.

    Jitter is uniform in ``[-jitter_px, +jitter_px]`` per coordinate (pixels),
    applied before clipping to the image; each frame is dropped with
    probability ``drop_rate``.
    """
    from .backend import ReplayBackend

    noise.validate()
    score_of = _score_sampler(noise.score_model)
    rng = np.random.default_rng(seed)
    w, h = track.config.image_width, track.config.image_height
    table: Dict[int, List[Detection]] = {}
    for fid, box in enumerate(track.boxes[placement]):
        if box is None:
            continue
        # draws happen for every visible frame so that changing one knob leaves
        # the other random streams aligned
        drop = rng.random() < noise.drop_rate if noise.drop_rate > 0 else False
        jit = rng.uniform(-noise.jitter_px, noise.jitter_px, size=4) if noise.jitter_px > 0 else None
        score = score_of(rng)
        if drop:
            continue
        if jit is not None:
            px = np.array(box.to_pixels(w, h).as_tuple()) + jit
            x0, x1 = sorted((min(max(px[0], 0.0), w), min(max(px[2], 0.0), w)))
            y0, y1 = sorted((min(max(px[1], 0.0), h), min(max(px[3], 0.0), h)))
            box = BoundingBox(x0 / w, y0 / h, x1 / w, y1 / h, True)
        table[fid] = [Detection(box, score)]
    return ReplayBackend(table, num_frames=track.num_frames)


def ground_truth(track: SyntheticTrack, placement: str) -> List[List[BoundingBox]]:
    return [[b] if b is not None else [] for b in track.boxes[placement]]


def write_track_voc(track: SyntheticTrack, placement: str, directory: str | Path) -> None:
    """Pixel-space VOC ground truth, one file per frame (``frame_000123.xml``)."""
    from .voc import ImageAnnotation, write_voc_dir

    w, h = track.config.image_width, track.config.image_height
    items = []
    for fid, gts in enumerate(ground_truth(track, placement)):
        items.append(ImageAnnotation(frame_image_id(fid), w, h, tuple(b.to_pixels(w, h) for b in gts)))
    write_voc_dir(directory, items)


def frame_image_id(frame_id: int) -> str:
    return f"frame_{frame_id:06d}"
