"""Detector backends: the frame-in/detections-out contract, a deterministic
replay backend and the single-threaded timing harness."""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .geometry import BoundingBox, Detection
from .timing import MeasurementError, TimingReport


class BackendUnavailable(RuntimeError):
    """The detector cannot serve any more frames (stream ended, model missing)."""


class ReplayFormatError(ValueError):
    def __init__(self, message: str, lineno: int = 0):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


@dataclass(frozen=True)
class Frame:
    frame_id: int
    timestamp: int  # monotonic nanoseconds
    width: int
    height: int
    pixels: Optional[np.ndarray] = None


class Backend:
    """Anything that turns a frame into detections in that frame's pixel space."""

    name = "backend"

    def detect(self, frame: Frame) -> Tuple[List[Detection], int]:
        """Return ``(detections, inference_latency_ns)``."""
        raise NotImplementedError

    def close(self) -> None:
        pass


def busy_wait_ns(duration_ns: int) -> None:
    """Sleep for most of the interval, then spin; plain ``sleep`` overshoots."""
    if duration_ns <= 0:
        return
    deadline = time.perf_counter_ns() + duration_ns
    coarse = duration_ns - 2_000_000
    if coarse > 0:
        time.sleep(coarse / 1e9)
    while time.perf_counter_ns() < deadline:
        pass


class ReplayBackend(Backend):
    """Serves recorded detections keyed by ``frame_id``.

    Boxes are stored normalized to [0, 1] and scaled to each frame's size.
    ``latency_ms`` holds optional per-frame synthetic inference delays;
    ``default_latency_ms`` applies to every other frame.
    """

    name = "replay"

    def __init__(
        self,
        table: Optional[Dict[int, List[Detection]]] = None,
        latency_ms: Optional[Dict[int, float]] = None,
        default_latency_ms: float = 0.0,
        num_frames: Optional[int] = None,
        fail_at: Optional[int] = None,
    ):
        self.table = {k: list(v) for k, v in (table or {}).items()}
        self.latency_ms = dict(latency_ms or {})
        self.default_latency_ms = default_latency_ms
        self.fail_at = fail_at
        if num_frames is None:
            ids = list(self.table) + list(self.latency_ms)
            num_frames = max(ids) + 1 if ids else 0
        self.num_frames = num_frames

    def lookup(self, frame_id: int) -> List[Detection]:
        return list(self.table.get(frame_id, ()))

    def detect(self, frame: Frame) -> Tuple[List[Detection], int]:
        if self.fail_at is not None and frame.frame_id >= self.fail_at:
            raise BackendUnavailable(f"replay backend failed at frame {frame.frame_id}")
        start = time.perf_counter_ns()
        dets = [
            Detection(d.box.to_pixels(frame.width, frame.height), d.score, d.class_id)
            for d in self.table.get(frame.frame_id, ())
        ]
        delay = self.latency_ms.get(frame.frame_id, self.default_latency_ms)
        if delay > 0:
            busy_wait_ns(int(round(delay * 1e6)) - (time.perf_counter_ns() - start))
        return dets, time.perf_counter_ns() - start

    def frames(self, width: int = 640, height: int = 480, frame_rate: float = 30.0) -> Iterator[Frame]:
        """The frame stream this table was recorded for, with synthetic timestamps."""
        period = 1e9 / frame_rate
        for i in range(self.num_frames):
            yield Frame(i, int(round(i * period)), width, height)


def _parse_float(text: str, what: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ReplayFormatError(f"{what} is not a number: {text!r}", lineno) from None


def parse_replay(text: str) -> ReplayBackend:
    table: Dict[int, List[Detection]] = {}
    latency: Dict[int, float] = {}
    directives: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and " " not in body.split("=", 1)[0]:
                key, value = body.split("=", 1)
                directives[key.strip()] = value.strip()
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (6, 7):
            raise ReplayFormatError(f"expected 6 or 7 fields, got {len(parts)}", lineno)
        try:
            frame_id = int(parts[0])
        except ValueError:
            raise ReplayFormatError(f"frame_id is not an integer: {parts[0]!r}", lineno) from None
        coords = [_parse_float(p, "coordinate", lineno) for p in parts[1:5]]
        score = _parse_float(parts[5], "score", lineno)
        try:
            det = Detection(BoundingBox.from_seq(coords, normalized=True), score)
        except ValueError as exc:
            raise ReplayFormatError(str(exc), lineno) from None
        table.setdefault(frame_id, []).append(det)
        if len(parts) == 7 and parts[6]:
            latency[frame_id] = _parse_float(parts[6], "latency", lineno)

    def _directive(key: str, cast):
        if key not in directives:
            return None
        try:
            return cast(directives[key])
        except ValueError:
            raise ReplayFormatError(f"bad directive {key}={directives[key]!r}") from None

    return ReplayBackend(
        table,
        latency,
        default_latency_ms=_directive("latency_ms", float) or 0.0,
        num_frames=_directive("frames", int),
        fail_at=_directive("fail_at", int),
    )


def load_replay(path: str | Path) -> ReplayBackend:
    """Load a replay table: ``frame_id, x_min, y_min, x_max, y_max, score[, latency_ms]``
    per line, normalized coordinates, ``#`` comments. Comment directives
    ``# frames=N``, ``# latency_ms=X`` and ``# fail_at=N`` are honoured."""
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise ReplayFormatError(f"not a text file: {exc}") from None
    return parse_replay(text)


def dump_replay(backend: ReplayBackend) -> str:
    lines = ["# frame_id,x_min,y_min,x_max,y_max,score[,latency_ms]"]
    lines.append(f"# frames={backend.num_frames}")
    if backend.default_latency_ms:
        lines.append(f"# latency_ms={backend.default_latency_ms!r}")
    if backend.fail_at is not None:
        lines.append(f"# fail_at={backend.fail_at}")
    for fid in sorted(set(backend.table) | set(backend.latency_ms)):
        dets = backend.table.get(fid, [])
        if fid in backend.latency_ms and not dets:
            raise ValueError(f"frame {fid} has a latency but no detections; not representable")
        for d in dets:
            b = d.box
            row = f"{fid},{b.x_min!r},{b.y_min!r},{b.x_max!r},{b.y_max!r},{d.score!r}"
            if fid in backend.latency_ms:
                row += f",{backend.latency_ms[fid]!r}"
            lines.append(row)
    return "\n".join(lines) + "\n"


def measure(backend: Backend, frames: Iterable[Frame], warmup: int = 0) -> TimingReport:
    """Time ``backend.detect`` over a stream, discarding the first ``warmup`` frames.

    The cyclic garbage collector is paused while timing, as ``timeit`` does;
    a collection over a large heap would otherwise land inside some
    frame's latency.
    """
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    latencies: List[float] = []
    walls: List[float] = []
    start = None
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i, frame in enumerate(frames):
            if i == warmup:
                start = time.perf_counter_ns()
            t0 = time.perf_counter_ns()
            _, inference_ns = backend.detect(frame)
            t1 = time.perf_counter_ns()
            if i >= warmup:
                latencies.append(inference_ns / 1e6)
                walls.append((t1 - t0) / 1e6)
    finally:
        if gc_was_enabled:
            gc.enable()
    if start is None or not latencies:
        raise MeasurementError("stream has no frames after warmup")
    wall_time = (time.perf_counter_ns() - start) / 1e9
    return TimingReport.build(latencies, wall_time, {"detect": latencies, "call": walls})
