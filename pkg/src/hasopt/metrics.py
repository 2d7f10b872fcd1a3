"""Session metrics, differentials against the optimal path, and run aggregation.

Per-minute rates are normalised by the video duration n*tau, and the session
duration runs from the first request at t = 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np

from .domain import SessionConfig, ThroughputTrace, Video, count_switches
from .optimizer import OptimalResult
from .simulator import SessionLog, analytic_session_log

METRIC_NAMES = (
    "switching_frequency",
    "avg_quality",
    "avg_buffer_level_s",
    "stalling_frequency",
    "stalling_time_ratio",
)


@dataclass(frozen=True)
class SessionMetrics:
    switching_frequency: float  # switches per minute of video
    avg_quality: float
    avg_buffer_level_s: float
    stalling_frequency: float  # stall events per minute of video
    stalling_time_ratio: float  # session duration / video duration

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DifferentialMetrics(SessionMetrics):
    """Algorithm value minus optimal-path value, field by field."""


def buffer_integral(log: SessionLog) -> float:
    """Exact integral of the buffer level over [0, playout_end].

    Segment k adds tau seconds at its arrival a_k and drains linearly from its
    playout start p_k, so it contributes tau * (p_k - a_k) + tau**2 / 2.
    """
    tau = log.segment_duration_s
    return sum(tau * (d.playout_start_s - d.download_end_s) + tau * tau / 2 for d in log.decisions)


def compute(log: SessionLog, video: Video, cfg: SessionConfig | None = None) -> SessionMetrics:
    levels = log.levels
    n = len(levels)
    video_minutes = n * video.segment_duration_s / 60.0
    session = log.playout_end_s
    return SessionMetrics(
        switching_frequency=count_switches(levels) / video_minutes,
        avg_quality=sum(levels) / n,
        avg_buffer_level_s=buffer_integral(log) / session,
        stalling_frequency=len(log.stall_events) / video_minutes,
        stalling_time_ratio=session / (n * video.segment_duration_s),
    )


def optimal_metrics(opt: OptimalResult, video: Video, trace: ThroughputTrace,
                    cfg: SessionConfig) -> SessionMetrics:
    return compute(analytic_session_log(opt.path, video, trace, cfg), video, cfg)


def differential(algo: SessionMetrics, opt: OptimalResult | SessionMetrics, video: Video = None,
                 cfg: SessionConfig = None, trace: ThroughputTrace = None) -> DifferentialMetrics:
    if isinstance(opt, OptimalResult):
        if trace is None:
            raise ValueError("a trace is needed to derive optimal-path metrics")
        opt = optimal_metrics(opt, video, trace, cfg)
    return DifferentialMetrics(**{f: getattr(algo, f) - getattr(opt, f) for f in METRIC_NAMES})


@dataclass(frozen=True)
class MetricSummary:
    values: list[float]  # sorted: support of the empirical CDF
    median: float
    fraction_le_zero: float

    def to_json(self) -> dict:
        return {"values": self.values, "median": self.median, "fraction_le_zero": self.fraction_le_zero}


def aggregate(runs: Iterable[SessionMetrics]) -> dict[str, MetricSummary]:
    runs = list(runs)
    if not runs:
        raise ValueError("cannot aggregate an empty set of runs")
    out = {}
    for f in fields(runs[0]):
        vals = np.sort(np.array([getattr(r, f.name) for r in runs], dtype=np.float64))
        out[f.name] = MetricSummary(
            [float(v) for v in vals], float(np.median(vals)), float(np.mean(vals <= 0)))
    return out
