"""Blind-zone membership and the debounced alert state machine."""

from __future__ import annotations

import configparser
import enum
import logging
import queue
import shlex
import subprocess
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .geometry import Detection
from .scenario import PLACEMENT_TAGS, ConfigError, ScenarioConfig, lane_band_hull

log = logging.getLogger(__name__)

RAISE_BUDGET_S = 2.0
DEFAULT_K_ON = 3
DEFAULT_K_OFF = 5

Point = Tuple[float, float]


class ClockError(ValueError):
    """Timestamps went backwards."""


# -- zones ----------------------------------------------------------------

def _segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and on_seg(p1, p2, q1))
        or (o2 == 0 and on_seg(p1, p2, q2))
        or (o3 == 0 and on_seg(q1, q2, p1))
        or (o4 == 0 and on_seg(q1, q2, p2))
    )


def is_simple(polygon: Sequence[Point]) -> bool:
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True)
class Zone:
    polygon: Tuple[Point, ...]
    placement_tag: str = "A_front_mirror"

    def __post_init__(self) -> None:
        poly = tuple((float(u), float(v)) for u, v in self.polygon)
        object.__setattr__(self, "polygon", poly)
        if len(poly) < 3:
            raise ConfigError(f"zone {self.placement_tag}: polygon needs >= 3 vertices, got {len(poly)}")
        if any(not (0.0 <= c <= 1.0) for pt in poly for c in pt):
            raise ConfigError(f"zone {self.placement_tag}: vertices must lie in [0, 1]^2")
        if not is_simple(poly):
            raise ConfigError(f"zone {self.placement_tag}: polygon self-intersects")


def point_on_segment(p: Point, a: Point, b: Point, eps: float = 1e-12) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > eps:
        return False
    return (
        min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def point_in_polygon(p: Point, polygon: Sequence[Point]) -> bool:
    """Even-odd rule, with points on the boundary counted as inside."""
    n = len(polygon)
    inside = False
    x, y = p
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if point_on_segment(p, a, b):
            return True
        if (a[1] > y) != (b[1] > y):
            x_cross = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x < x_cross:
                inside = not inside
    return inside


def in_zone(det: Detection, zone: Zone) -> bool:
    """Whether the detection's ground-contact point (bottom-center of the
    normalized box) lies in the zone."""
    return point_in_polygon(det.box.bottom_center, zone.polygon)


def parse_polygon(text: str) -> Tuple[Point, ...]:
    """``"u v; u v; ..."`` -> vertex tuple."""
    pts = []
    for chunk in text.replace("\n", ";").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        u, v = chunk.replace(",", " ").split()
        pts.append((float(u), float(v)))
    return tuple(pts)


def format_polygon(polygon: Sequence[Point], digits: int = 6) -> str:
    return "; ".join(f"{u:.{digits}f} {v:.{digits}f}" for u, v in polygon)


def _tag_key(tag: str) -> str:
    tag = tag.strip().lower()  # configparser lowercases option names
    for short, full in PLACEMENT_TAGS.items():
        if tag in (short.lower(), full.lower()):
            return short
    raise ConfigError(f"unknown placement tag {tag!r}; expected one of {sorted(PLACEMENT_TAGS.values())}")


def default_zone_presets() -> Dict[str, Tuple[Point, ...]]:
    text = resources.files("blindspot").joinpath("data/zones.ini").read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(text)
    return {key: parse_polygon(parser["zones"][key]) for key in PLACEMENT_TAGS if key in parser["zones"]}


def derive_zone_presets(cfg: Optional[ScenarioConfig] = None) -> Dict[str, Tuple[Point, ...]]:
    """Zones obtained by projecting the scenario's lane band through each
    placement's camera; the shipped presets are these, rounded to 1e-6."""
    cfg = cfg or ScenarioConfig()
    return {key: tuple(lane_band_hull(cfg, key)) for key in PLACEMENT_TAGS}


def zone_for_placement(tag: str, overrides: Optional[Mapping[str, str | Sequence[Point]]] = None) -> Zone:
    """Preset zone for a placement (``A``/``B``/``C`` or the long tag name);
    an override polygon for that placement wins over the shipped preset."""
    key = _tag_key(tag)
    matching = [name for name in (overrides or {}) if _tag_key(name) == key]
    if matching:
        name = matching[0]
        poly = overrides[name]
        if isinstance(poly, str):
            try:
                poly = parse_polygon(poly)
            except ValueError:
                raise ConfigError(f"zone {name}: cannot parse polygon {poly!r}") from None
        return Zone(tuple(poly), PLACEMENT_TAGS[key])
    return Zone(default_zone_presets()[key], PLACEMENT_TAGS[key])


# -- state machine --------------------------------------------------------

class Mode(enum.Enum):
    IDLE = "IDLE"
    TENTATIVE = "TENTATIVE"
    ACTIVE = "ACTIVE"
    COOLDOWN = "COOLDOWN"


class EventKind(enum.Enum):
    RAISED = "RAISED"
    CLEARED = "CLEARED"


@dataclass(frozen=True)
class AlertParams:
    k_on: int = DEFAULT_K_ON
    k_off: int = DEFAULT_K_OFF

    def __post_init__(self) -> None:
        if self.k_on < 1 or self.k_off < 1:
            raise ConfigError(f"debounce counts must be >= 1, got k_on={self.k_on} k_off={self.k_off}")


def check_raise_budget(k_on: int, frame_rate: float, budget_s: float = RAISE_BUDGET_S) -> None:
    """Reject debounce settings whose ``k_on`` frames span more than the budget."""
    if frame_rate <= 0:
        raise ConfigError(f"frame_rate must be positive, got {frame_rate}")
    if k_on / frame_rate > budget_s:
        raise ConfigError(
            f"debounce.k_on: {k_on} frames at {frame_rate:g} fps take {k_on / frame_rate:.3f} s, "
            f"over the {budget_s:g} s alert budget"
        )


@dataclass(frozen=True)
class AlertState:
    mode: Mode = Mode.IDLE
    consecutive_hits: int = 0
    consecutive_misses: int = 0
    last_transition: int = 0
    last_timestamp: Optional[int] = None

    @property
    def alerting(self) -> bool:
        return self.mode in (Mode.ACTIVE, Mode.COOLDOWN)


@dataclass(frozen=True)
class AlertEvent:
    kind: EventKind
    timestamp: int
    detections: Tuple[Detection, ...] = ()
    placement_tag: str = ""

    def log_line(self) -> str:
        snap = " ".join(
            f"[{d.box.x_min!r} {d.box.y_min!r} {d.box.x_max!r} {d.box.y_max!r} {d.score!r}]"
            for d in self.detections
        )
        return f"{self.timestamp},{self.kind.value},{self.placement_tag},{snap}"


def alert_step(
    state: AlertState,
    dets: Sequence[Detection],
    zone: Zone,
    now: int,
    params: AlertParams = AlertParams(),
) -> Tuple[AlertState, List[AlertEvent]]:
    """Advance the machine by one frame.

    IDLE -> TENTATIVE on a hit; ``k_on`` consecutive hits raise (-> ACTIVE);
    a miss while TENTATIVE resets to IDLE. While alerting, misses move to
    COOLDOWN and ``k_off`` consecutive misses clear (-> IDLE); a hit during
    COOLDOWN returns to ACTIVE.
    """
    if state.last_timestamp is not None and now < state.last_timestamp:
        raise ClockError(f"timestamp {now} precedes previous {state.last_timestamp}")
    in_zone_dets = tuple(d for d in dets if in_zone(d, zone))
    hit = bool(in_zone_dets)
    mode, hits, misses, changed = state.mode, state.consecutive_hits, state.consecutive_misses, state.last_transition
    events: List[AlertEvent] = []

    if mode in (Mode.IDLE, Mode.TENTATIVE):
        if hit:
            hits += 1
            if hits >= params.k_on:
                mode, misses = Mode.ACTIVE, 0
                events.append(AlertEvent(EventKind.RAISED, now, in_zone_dets, zone.placement_tag))
            else:
                mode = Mode.TENTATIVE
        else:
            mode, hits = Mode.IDLE, 0
    else:
        if hit:
            mode, misses = Mode.ACTIVE, 0
            hits += 1
        else:
            misses += 1
            hits = 0
            if misses >= params.k_off:
                mode, misses = Mode.IDLE, 0
                events.append(AlertEvent(EventKind.CLEARED, now, (), zone.placement_tag))
            else:
                mode = Mode.COOLDOWN

    if mode is not state.mode:
        changed = now
    return AlertState(mode, hits, misses, changed, now), events


# -- outputs --------------------------------------------------------------

class EventPublisher:
    """Fan-out of alert events to subscriber queues of bounded depth.

    A subscriber that falls behind loses events (counted in ``overflows``)
    rather than stalling the alert stage.
    """

    def __init__(self) -> None:
        self._subs: List[queue.Queue] = []
        self.overflows = 0

    def subscribe(self, maxsize: int = 64) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=maxsize)
        self._subs.append(q)
        return q

    def publish(self, event: AlertEvent) -> None:
        for q in self._subs:
            try:
                q.put_nowait(event)
            except queue.Full:
                self.overflows += 1
                log.warning("alert subscriber queue full; event dropped for that subscriber")


@dataclass
class AlertHooks:
    """Process-level reactions: an optional sound command run on RAISED and a
    visual overlay flag that mirrors the alerting state."""

    sound_command: str = ""
    overlay_active: bool = False
    callbacks: List[Callable[[AlertEvent], None]] = field(default_factory=list)

    def __call__(self, event: AlertEvent) -> None:
        self.overlay_active = event.kind is EventKind.RAISED
        if event.kind is EventKind.RAISED and self.sound_command:
            try:
                subprocess.Popen(shlex.split(self.sound_command), stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
            except OSError as exc:
                log.warning("sound command failed: %s", exc)
        for cb in self.callbacks:
            cb(event)
