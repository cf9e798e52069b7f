"""Command-line entry point: ``blindspot {run,eval,scenario,summarize,augment,zones}``.

Exit codes:
    0  success
    2  configuration or input error
    3  backend failure
``BLINDSPOT_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import logging
import os
import signal
import sys
import threading
from pathlib import Path
from typing import List, Optional

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3

log = logging.getLogger("blindspot")


class InputError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("BLINDSPOT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _report_dir(args, default: str) -> Path:
    path = Path(args.report_dir or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


@contextlib.contextmanager
def _drain_on_signal():
    """SIGINT/SIGTERM stop ingest and let queued frames drain instead of
    killing the run mid-frame. Handlers are restored afterwards."""
    stop = threading.Event()
    if threading.current_thread() is not threading.main_thread():
        yield stop
        return

    def handler(signum, _frame):
        log.warning("received %s; draining queued frames", signal.Signals(signum).name)
        stop.set()

    previous = {sig: signal.signal(sig, handler) for sig in (signal.SIGINT, signal.SIGTERM)}
    try:
        yield stop
    finally:
        for sig, old in previous.items():
            signal.signal(sig, old)


# -- commands -------------------------------------------------------------

def cmd_run(args) -> int:
    from .config import load_pipeline_config
    from .pipeline import run_pipeline

    cfg = load_pipeline_config(
        args.config,
        replay=args.replay,
        placement=args.placement,
        score_threshold=args.score_thresh,
        nms_threshold=args.nms_thresh,
        k_on=args.k_on,
        k_off=args.k_off,
        frame_rate_target=args.fps,
        report_dir=args.report_dir,
        dump_frames=args.dump_frames,
    )
    cfg.validate()
    with _drain_on_signal() as stop:
        summary = run_pipeline(cfg, stop_event=stop)
    for line in summary.report_lines():
        print(line)
    if summary.timing is not None:
        print(f"fps={summary.timing.fps:.1f}")
    return EXIT_BACKEND if summary.backend_error else EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import coco_map, read_detections_file
    from .voc import load_voc_dir

    gts = load_voc_dir(args.gt_dir)
    if not Path(args.detections).is_file():
        raise InputError(f"detections file not found: {args.detections}")
    dets = read_detections_file(args.detections)
    known = {a.image_id for a in gts}
    stray = sorted(set(dets) - known)
    if stray:
        raise InputError(f"detections reference unknown image ids: {', '.join(stray[:5])}")
    per_image = [(dets.get(a.image_id, []), list(a.boxes)) for a in sorted(gts, key=lambda a: a.image_id)]
    metrics = coco_map(per_image)
    out = _report_dir(args, "reports/eval")
    metrics.write(out, curves=not args.no_curves)
    for line in metrics.report_lines():
        print(line)
    return EXIT_OK


def cmd_scenario(args) -> int:
    from .config import load_pipeline_config
    from .pipeline import run_scenario
    from .scenario import NoiseModel, load_scenario_config

    scfg = load_scenario_config(args.config)
    noise = NoiseModel(args.jitter, args.drop_rate, args.score_model)
    if args.config:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.read(args.config)
        if parser.has_section("noise"):
            sec = parser["noise"]
            noise = NoiseModel(
                float(sec.get("jitter_px", noise.jitter_px)) if args.jitter == 0 else args.jitter,
                float(sec.get("drop_rate", noise.drop_rate)) if args.drop_rate == 0 else args.drop_rate,
                sec.get("score_model", noise.score_model),
            )
    noise.validate()
    pcfg = load_pipeline_config(
        args.config,
        placement=args.placement,
        score_threshold=args.score_thresh,
        nms_threshold=args.nms_thresh,
        k_on=args.k_on,
        k_off=args.k_off,
        frame_rate_target=scfg.frame_rate,
        dump_frames=args.dump_frames,
    )
    out = _report_dir(args, "reports/scenario")
    with _drain_on_signal() as stop:
        summary, metrics = run_scenario(scfg, pcfg, noise, args.seed, out, stop_event=stop)
    for line in summary.report_lines() + metrics.report_lines():
        print(line)
    return EXIT_BACKEND if summary.backend_error else EXIT_OK


def cmd_summarize(args) -> int:
    from .voc import load_voc_dir, summarize, write_summary

    items = load_voc_dir(args.voc_dir)
    summary = summarize(items, args.grid)
    out = _report_dir(args, "reports/summary")
    write_summary(summary, out)
    print(f"image_count={summary.image_count}")
    print(f"instance_count={summary.instance_count}")
    return EXIT_OK


def cmd_augment(args) -> int:
    from .augment import AugmentationParams, triple_dataset
    from .raster import read_image, write_image
    from .voc import load_voc_dir, split_dataset, write_voc_dir

    items = load_voc_dir(args.voc_dir)
    image_dir = Path(args.image_dir or args.voc_dir)
    out = _report_dir(args, "reports/augmented")
    train, val = split_dataset(items, args.train_fraction, args.seed)

    def load(annot):
        path = image_dir / annot.filename
        if not path.is_file():
            raise InputError(f"image not found for {annot.image_id}: {path}")
        img = read_image(path)
        if img.shape[:2] != (annot.height, annot.width):
            raise InputError(f"{path}: raster is {img.shape[1]}x{img.shape[0]}, annotation says {annot.width}x{annot.height}")
        return img

    params = AugmentationParams(seed=args.seed)
    expanded = triple_dataset(train, [load(a) for a in train], params, args.seed)
    train_dir = out / "train"
    write_voc_dir(train_dir, [a for a, _ in expanded])
    for annot, img in expanded:
        write_image(train_dir / annot.filename, img)
    val_dir = out / "val"
    write_voc_dir(val_dir, val)
    for annot in val:
        write_image(val_dir / annot.filename, load(annot))
    (out / "augment_report.txt").write_text(
        f"seed={args.seed}\n"
        f"train_fraction={args.train_fraction!r}\n"
        f"originals={len(items)}\n"
        f"train_originals={len(train)}\n"
        f"train_augmented_total={len(expanded)}\n"
        f"val={len(val)}\n"
    )
    print(f"train={len(expanded)} val={len(val)}")
    return EXIT_OK


def cmd_zones(args) -> int:
    from .alert import derive_zone_presets, format_polygon

    print("[zones]")
    for key, poly in derive_zone_presets().items():
        print(f"{key} = {format_polygon(poly)}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--placement", choices=["A", "B", "C"])
    p.add_argument("--score-thresh", type=float)
    p.add_argument("--nms-thresh", type=float)
    p.add_argument("--k-on", type=int)
    p.add_argument("--k-off", type=int)
    p.add_argument("--dump-frames", metavar="DIR", help="write annotated PPM frames here (debugging aid)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindspot", description="Blind-spot cyclist detection toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the detection/alert pipeline on a replay source")
    p.add_argument("--config")
    p.add_argument("--replay")
    _pipeline_flags(p)
    p.add_argument("--fps", type=float, help="frame rate of the replay stream")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="COCO-style mAP of a detections file against VOC ground truth")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--no-curves", action="store_true")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scenario", help="synthetic closed-loop scenario run")
    p.add_argument("--config")
    _pipeline_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.0, help="box jitter in pixels")
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--score-model", default="constant:1.0")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("summarize", help="dataset heatmap and instances-per-image histogram")
    p.add_argument("--voc-dir", required=True)
    p.add_argument("--grid", type=int, default=10)
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("augment", help="split, then triple the training split with augmentation")
    p.add_argument("--voc-dir", required=True)
    p.add_argument("--image-dir")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("zones", help="print zone presets derived from the default scenario")
    p.set_defaults(func=cmd_zones)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from .backend import BackendUnavailable, ReplayFormatError
    from .scenario import ConfigError
    from .voc import ParseError

    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ParseError, ReplayFormatError, FileNotFoundError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendUnavailable as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
