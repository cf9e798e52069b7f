"""Pipeline configuration: INI file plus command-line overrides, validated as
a whole so every bad field is reported at once."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

from .alert import AlertParams, RAISE_BUDGET_S, Zone, zone_for_placement
from .scenario import PLACEMENT_TAGS, ConfigError

__all__ = ["ConfigError", "PipelineConfig", "load_pipeline_config"]


@dataclass(frozen=True)
class PipelineConfig:
    replay: Optional[str] = None
    live_adapter: Optional[str] = None
    score_threshold: float = 0.5
    nms_threshold: float = 0.5
    placement: str = "A"
    k_on: int = 3
    k_off: int = 5
    frame_rate_target: float = 30.0
    frame_width: int = 640
    frame_height: int = 480
    queue_depth: int = 4
    report_dir: Optional[str] = None
    sound_command: str = ""
    dump_frames: Optional[str] = None
    zone_overrides: Dict[str, str] = field(default_factory=dict)

    def problems(self) -> List[str]:
        out = []
        if self.replay is None and self.live_adapter is None:
            out.append("source: one of replay or live_adapter is required")
        if self.replay is not None and self.live_adapter is not None:
            out.append("source: replay and live_adapter are mutually exclusive")
        if self.live_adapter is not None:
            out.append(f"source.live_adapter: no live adapter named {self.live_adapter!r} is installed")
        if self.replay is not None and not Path(self.replay).is_file():
            out.append(f"source.replay: file not found: {self.replay}")
        if not 0.0 <= self.score_threshold <= 1.0:
            out.append(f"pipeline.score_threshold: must be in [0, 1], got {self.score_threshold!r}")
        if not 0.0 < self.nms_threshold <= 1.0:
            out.append(f"pipeline.nms_threshold: must be in (0, 1], got {self.nms_threshold!r}")
        if self.placement not in PLACEMENT_TAGS and self.placement not in PLACEMENT_TAGS.values():
            out.append(f"pipeline.placement: must be one of A, B, C, got {self.placement!r}")
        if self.k_on < 1:
            out.append(f"debounce.k_on: must be >= 1, got {self.k_on}")
        if self.k_off < 1:
            out.append(f"debounce.k_off: must be >= 1, got {self.k_off}")
        fps_ok = math.isfinite(self.frame_rate_target) and self.frame_rate_target > 0
        if not fps_ok:
            out.append(f"pipeline.frame_rate_target: must be positive, got {self.frame_rate_target!r}")
        elif self.k_on >= 1 and self.k_on / self.frame_rate_target > RAISE_BUDGET_S:
            out.append(
                f"debounce.k_on: {self.k_on} frames at {self.frame_rate_target:g} fps take "
                f"{self.k_on / self.frame_rate_target:.3f} s, over the {RAISE_BUDGET_S:g} s alert budget"
            )
        if self.frame_width <= 0 or self.frame_height <= 0:
            out.append(f"pipeline.frame_size: must be positive, got {self.frame_width}x{self.frame_height}")
        if self.queue_depth < 1:
            out.append(f"pipeline.queue_depth: must be >= 1, got {self.queue_depth}")
        if not out or all(not p.startswith("pipeline.placement") for p in out):
            try:
                self.zone()
            except ConfigError as exc:
                out.extend(exc.problems)
        return out

    def validate(self, require_source: bool = True) -> "PipelineConfig":
        problems = self.problems()
        if not require_source:
            problems = [p for p in problems if not p.startswith("source")]
        if problems:
            raise ConfigError(problems)
        return self

    def zone(self) -> Zone:
        return zone_for_placement(self.placement, self.zone_overrides)

    @property
    def alert_params(self) -> AlertParams:
        return AlertParams(self.k_on, self.k_off)


_SECTION_KEYS = {
    "pipeline": {
        "replay", "live_adapter", "score_threshold", "nms_threshold", "placement",
        "frame_rate_target", "frame_width", "frame_height", "queue_depth", "report_dir",
        "sound_command", "dump_frames",
    },
    "debounce": {"k_on", "k_off"},
}


def _coerce(values: Dict[str, object]) -> Dict[str, object]:
    types = {f.name: f.type for f in fields(PipelineConfig)}
    out: Dict[str, object] = {}
    problems = []
    for key, raw in values.items():
        if raw is None:
            continue
        t = types[key]
        try:
            if t == "int":
                out[key] = int(raw)
            elif t == "float":
                out[key] = float(raw)
            else:
                out[key] = raw
        except (TypeError, ValueError):
            problems.append(f"{key}: cannot parse {raw!r} as {t}")
    if problems:
        raise ConfigError(problems)
    return out


def load_pipeline_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Read ``[pipeline]``, ``[debounce]`` and ``[zones]`` sections; keyword
    overrides (``None`` meaning "not given") take precedence. Relative paths
    in the file resolve against the file's directory. Not validated here."""
    values: Dict[str, object] = {}
    zones: Dict[str, str] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            ok = parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"config {path}: {exc}") from None
        if not ok:
            raise ConfigError(f"config: cannot read {path}")
        problems = []
        for section in parser.sections():
            if section == "zones":
                zones.update(parser["zones"])
                continue
            if section not in _SECTION_KEYS:
                if section not in ("scenario", "noise"):  # read by the scenario command
                    problems.append(f"config: unknown section [{section}]")
                continue
            for key, value in parser[section].items():
                if key not in _SECTION_KEYS[section]:
                    problems.append(f"{section}.{key}: unknown key")
                else:
                    values[key] = value
        if problems:
            raise ConfigError(problems)
        base = Path(path).parent
        for key in ("replay", "report_dir", "dump_frames"):
            if key in values and not Path(str(values[key])).is_absolute():
                values[key] = str(base / str(values[key]))
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = [k for k in values if k not in {f.name for f in fields(PipelineConfig)}]
    if unknown:
        raise ConfigError([f"{k}: unknown setting" for k in unknown])
    cfg = PipelineConfig(**_coerce(values))
    if zones:
        cfg = replace(cfg, zone_overrides={**zones, **cfg.zone_overrides})
    return cfg
