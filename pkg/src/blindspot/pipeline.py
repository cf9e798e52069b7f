"""Staged frame pipeline: ingest -> detect+postprocess -> alert+report.

Stages run concurrently and hand frames over bounded FIFO queues. A full
queue blocks the producer; frames are never dropped.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .alert import (
    AlertEvent,
    AlertHooks,
    AlertState,
    EventKind,
    EventPublisher,
    alert_step,
    in_zone,
)
from .backend import Backend, BackendUnavailable, Frame, ReplayBackend, load_replay
from .config import PipelineConfig
from .evaluation import MetricsBundle, coco_map
from .geometry import BoundingBox, Detection, filter_by_score, nms
from .scenario import (
    NoiseModel,
    ScenarioConfig,
    export_replay,
    generate_track,
    ground_truth,
    write_track_voc,
)
from .overlay import render_overlay
from .raster import write_image
from .timing import TimingReport

log = logging.getLogger(__name__)

_STOP = object()


@dataclass
class RunSummary:
    frames: int = 0
    detections_total: int = 0
    alerts_raised: int = 0
    alerts_cleared: int = 0
    first_alert_latency: Optional[float] = None
    backend_error: Optional[str] = None
    interrupted: bool = False
    events: List[AlertEvent] = field(default_factory=list)
    frame_detections: List[List[Detection]] = field(default_factory=list, repr=False)
    timing: Optional[TimingReport] = field(default=None, compare=False, repr=False)

    def report_lines(self) -> List[str]:
        lat = "none" if self.first_alert_latency is None else f"{self.first_alert_latency:.6f}"
        return [
            f"frames={self.frames}",
            f"detections_total={self.detections_total}",
            f"alerts_raised={self.alerts_raised}",
            f"alerts_cleared={self.alerts_cleared}",
            f"first_alert_latency_s={lat}",
            f"backend_error={self.backend_error or 'none'}",
            f"interrupted={str(self.interrupted).lower()}",
        ]

    def write(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "run_summary.txt").write_text("\n".join(self.report_lines()) + "\n")
        lines = ["# timestamp_ns,kind,placement_tag,detections"] + [e.log_line() for e in self.events]
        (directory / "alerts.log").write_text("\n".join(lines) + "\n")
        if self.timing is not None:
            self.timing.write(directory / "timing.txt", directory / "latency.csv")


@dataclass
class _Work:
    frame: Frame
    ingest_ns: int
    dets: List[Detection] = field(default_factory=list)
    detect_ns: int = 0
    post_ns: int = 0


def _put(q: queue.Queue, item, stop: threading.Event) -> bool:
    """Blocking put that gives up only when the pipeline is shutting down."""
    while True:
        try:
            q.put(item, timeout=0.05)
            return True
        except queue.Full:
            if stop.is_set():
                return False


def postprocess(dets: Sequence[Detection], cfg: PipelineConfig, width: int, height: int) -> List[Detection]:
    """Score filter, NMS, then conversion to normalized coordinates."""
    kept = nms(filter_by_score(dets, cfg.score_threshold), cfg.nms_threshold)
    return [Detection(d.box.to_normalized(width, height), d.score, d.class_id) for d in kept]


def run_pipeline(
    cfg: PipelineConfig,
    backend: Optional[Backend] = None,
    frames: Optional[Iterable[Frame]] = None,
    hooks: Optional[AlertHooks] = None,
    publisher: Optional[EventPublisher] = None,
    stop_event: Optional[threading.Event] = None,
) -> RunSummary:
    """Push frames through the detector and on into the alert machine.

    With no ``backend``/``frames`` the replay file named in ``cfg`` supplies
    both. A ``BackendUnavailable`` mid-run drains the frames already in
    flight and is reported in ``RunSummary.backend_error``. Setting
    ``stop_event`` (the CLI does so on SIGINT/SIGTERM) stops ingest; frames
    already queued still go through every stage.
    """
    if backend is None:
        cfg.validate()
        backend = load_replay(cfg.replay)
    else:
        cfg.validate(require_source=False)
    if frames is None:
        if not isinstance(backend, ReplayBackend):
            raise ValueError("a frame source is required for non-replay backends")
        frames = backend.frames(cfg.frame_width, cfg.frame_height, cfg.frame_rate_target)

    zone = cfg.zone()
    params = cfg.alert_params
    hooks = hooks if hooks is not None else AlertHooks(sound_command=cfg.sound_command)
    stop = threading.Event()  # producer should quit (backend failure or abort)
    abort = threading.Event()  # the consumer is gone
    q_in: queue.Queue = queue.Queue(maxsize=cfg.queue_depth)
    q_out: queue.Queue = queue.Queue(maxsize=cfg.queue_depth)
    failure: List[str] = []
    ingest_ms: List[float] = []

    interrupted: List[bool] = []
    dump_dir = Path(cfg.dump_frames) if cfg.dump_frames else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    def ingest() -> None:
        try:
            for frame in frames:
                if stop_event is not None and stop_event.is_set():
                    interrupted.append(True)
                    return
                t0 = time.perf_counter_ns()
                work = _Work(frame, t0)
                ingest_ms.append((time.perf_counter_ns() - t0) / 1e6)
                if not _put(q_in, work, stop):
                    return
        finally:
            _put(q_in, _STOP, abort)

    def detect() -> None:
        try:
            while True:
                work = q_in.get()
                if work is _STOP:
                    break
                frame = work.frame
                try:
                    raw, work.detect_ns = backend.detect(frame)
                except BackendUnavailable as exc:
                    log.error("backend unavailable: %s; draining", exc)
                    failure.append(str(exc))
                    stop.set()
                    break
                t0 = time.perf_counter_ns()
                work.dets = postprocess(raw, cfg, frame.width, frame.height)
                work.post_ns = time.perf_counter_ns() - t0
                if not _put(q_out, work, abort):
                    break
        finally:
            _put(q_out, _STOP, abort)
            # unblock the producer if it is waiting on a full queue
            while stop.is_set() and not abort.is_set():
                try:
                    if q_in.get(timeout=0.05) is _STOP:
                        break
                except queue.Empty:
                    pass

    summary = RunSummary()
    state = AlertState()
    first_in_zone: Optional[int] = None
    first_raise: Optional[int] = None
    last_id: Optional[int] = None
    e2e_ms: List[float] = []
    detect_ms: List[float] = []
    post_ms: List[float] = []
    alert_ms: List[float] = []
    overhead_ms: List[float] = []

    threads = [threading.Thread(target=ingest, name="ingest", daemon=True),
               threading.Thread(target=detect, name="detect", daemon=True)]
    wall0 = time.perf_counter_ns()
    for t in threads:
        t.start()
    try:
        while True:
            work = q_out.get()
            if work is _STOP:
                break
            frame = work.frame
            if last_id is not None and frame.frame_id <= last_id:
                raise RuntimeError(f"frame {frame.frame_id} arrived after {last_id}")
            last_id = frame.frame_id
            t0 = time.perf_counter_ns()
            state, events = alert_step(state, work.dets, zone, frame.timestamp, params)
            if first_in_zone is None and any(in_zone(d, zone) for d in work.dets):
                first_in_zone = frame.timestamp
            for ev in events:
                summary.events.append(ev)
                if ev.kind is EventKind.RAISED:
                    summary.alerts_raised += 1
                    if first_raise is None:
                        first_raise = ev.timestamp
                else:
                    summary.alerts_cleared += 1
                hooks(ev)
                if publisher is not None:
                    publisher.publish(ev)
            if dump_dir is not None:
                img = render_overlay(frame.width, frame.height, zone, work.dets, state.alerting, frame.pixels)
                write_image(dump_dir / f"frame_{frame.frame_id:06d}.ppm", img)
            summary.frames += 1
            summary.detections_total += len(work.dets)
            summary.frame_detections.append(work.dets)
            t1 = time.perf_counter_ns()
            alert_ms.append((t1 - t0) / 1e6)
            detect_ms.append(work.detect_ns / 1e6)
            post_ms.append(work.post_ns / 1e6)
            e2e = (t1 - work.ingest_ns) / 1e6
            e2e_ms.append(e2e)
            overhead_ms.append(e2e - work.detect_ns / 1e6)
    finally:
        abort.set()
        stop.set()
        for t in threads:
            t.join(timeout=5.0)
    wall = (time.perf_counter_ns() - wall0) / 1e9

    if failure:
        summary.backend_error = failure[0]
    summary.interrupted = bool(interrupted)
    if first_raise is not None and first_in_zone is not None:
        summary.first_alert_latency = (first_raise - first_in_zone) / 1e9
    if e2e_ms:
        summary.timing = TimingReport.build(
            e2e_ms,
            wall,
            {
                "ingest": ingest_ms[: len(e2e_ms)],
                "detect": detect_ms,
                "postprocess": post_ms,
                "alert": alert_ms,
                "overhead": overhead_ms,
            },
        )
    if cfg.report_dir:
        summary.write(cfg.report_dir)
    return summary


def evaluate_run(summary: RunSummary, truth: Sequence[Sequence[BoundingBox]]) -> MetricsBundle:
    """Score a run's per-frame detections (normalized) against per-frame truth."""
    per_image = []
    for fid, gts in enumerate(truth):
        dets = summary.frame_detections[fid] if fid < len(summary.frame_detections) else []
        per_image.append((dets, list(gts)))
    return coco_map(per_image)


def run_scenario(
    scenario_cfg: ScenarioConfig,
    pipeline_cfg: PipelineConfig,
    noise: NoiseModel = NoiseModel(),
    seed: int = 0,
    report_dir: Optional[str | Path] = None,
    stop_event: Optional[threading.Event] = None,
) -> Tuple[RunSummary, MetricsBundle]:
    """Closed loop: synthesize the track, export a replay, run the pipeline on
    it and evaluate what came out against the track's truth."""
    scenario_cfg.validate()
    placement = pipeline_cfg.placement[0]
    track = generate_track(scenario_cfg)
    replay = export_replay(track, placement, noise, seed)
    pcfg = replace(
        pipeline_cfg,
        frame_rate_target=scenario_cfg.frame_rate,
        frame_width=scenario_cfg.image_width,
        frame_height=scenario_cfg.image_height,
        report_dir=str(report_dir) if report_dir is not None else None,
        replay=None,
        live_adapter=None,
    )
    if report_dir is not None:
        from .backend import dump_replay

        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        replay_path = report_dir / "scenario_replay.txt"
        replay_path.write_text(dump_replay(replay))
        write_track_voc(track, placement, report_dir / "ground_truth")
        replay = load_replay(replay_path)
    summary = run_pipeline(pcfg, backend=replay, stop_event=stop_event)
    metrics = evaluate_run(summary, ground_truth(track, placement))
    if report_dir is not None:
        metrics.write(report_dir)
    return summary, metrics
