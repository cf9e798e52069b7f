"""Latency percentiles and throughput reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence


class MeasurementError(RuntimeError):
    pass


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile of an ascending sample."""
    if not sorted_values:
        raise MeasurementError("percentile of an empty sample")
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return sorted_values[min(rank, len(sorted_values)) - 1]


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    max_ms: float

    @classmethod
    def from_ms(cls, samples_ms: Sequence[float]) -> "LatencyStats":
        s = sorted(samples_ms)
        return cls(
            count=len(s),
            mean_ms=sum(s) / len(s),
            p50_ms=nearest_rank(s, 50),
            p95_ms=nearest_rank(s, 95),
            p99_ms=nearest_rank(s, 99),
            max_ms=s[-1],
        )


@dataclass
class TimingReport:
    frames_processed: int
    wall_time: float
    fps: float
    latency_p50: float
    latency_p95: float
    latency_p99: float
    per_stage: Dict[str, LatencyStats] = field(default_factory=dict)
    latencies_ms: List[float] = field(default_factory=list, repr=False)

    @classmethod
    def build(
        cls,
        latencies_ms: Sequence[float],
        wall_time: float,
        per_stage_ms: Dict[str, Sequence[float]] | None = None,
    ) -> "TimingReport":
        if not latencies_ms:
            raise MeasurementError("no frames left to measure")
        if wall_time <= 0:
            raise MeasurementError(f"non-positive wall time {wall_time}")
        stats = LatencyStats.from_ms(latencies_ms)
        stages = {name: LatencyStats.from_ms(v) for name, v in (per_stage_ms or {}).items() if v}
        return cls(
            frames_processed=len(latencies_ms),
            wall_time=wall_time,
            fps=len(latencies_ms) / wall_time,
            latency_p50=stats.p50_ms,
            latency_p95=stats.p95_ms,
            latency_p99=stats.p99_ms,
            per_stage=stages,
            latencies_ms=list(latencies_ms),
        )

    def check(self) -> None:
        """Raise if the report's internal relations do not hold."""
        if abs(self.fps - self.frames_processed / self.wall_time) > 1e-9 * self.fps:
            raise AssertionError("fps does not equal frames_processed / wall_time")
        if not self.latency_p50 <= self.latency_p95 <= self.latency_p99:
            raise AssertionError("latency percentiles out of order")
        for name, st in self.per_stage.items():
            if not st.p50_ms <= st.p95_ms <= st.p99_ms:
                raise AssertionError(f"stage {name}: percentiles out of order")

    def report_lines(self) -> List[str]:
        lines = [
            f"frames_processed={self.frames_processed}",
            f"wall_time_s={self.wall_time:.6f}",
            f"fps={self.fps:.3f}",
            f"latency_p50_ms={self.latency_p50:.4f}",
            f"latency_p95_ms={self.latency_p95:.4f}",
            f"latency_p99_ms={self.latency_p99:.4f}",
        ]
        for name in sorted(self.per_stage):
            st = self.per_stage[name]
            lines += [
                f"stage.{name}.p50_ms={st.p50_ms:.4f}",
                f"stage.{name}.p95_ms={st.p95_ms:.4f}",
                f"stage.{name}.p99_ms={st.p99_ms:.4f}",
                f"stage.{name}.mean_ms={st.mean_ms:.4f}",
            ]
        return lines

    def write(self, path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(path).write_text("\n".join(self.report_lines()) + "\n")
        if csv_path is not None:
            rows = ["frame,latency_ms"] + [f"{i},{v:.6f}" for i, v in enumerate(self.latencies_ms)]
            Path(csv_path).write_text("\n".join(rows) + "\n")
