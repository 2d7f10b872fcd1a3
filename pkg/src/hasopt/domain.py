"""Core value types: video manifest, throughput trace, adaptation path, session config.

Units are bytes and seconds throughout. Quality levels are 1-based.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MBPS = 125_000.0  # bytes/second per Mbit/s


class InfeasibleError(Exception):
    """Even the lowest quality on every segment misses a deadline."""

    def __init__(self, message: str, segment: int | None = None):
        super().__init__(message)
        self.segment = segment


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Video:
    segment_duration_s: float
    sizes: np.ndarray  # (n, r) bytes
    level_nominal_rates: np.ndarray | None = None

    def __post_init__(self):
        sizes = _frozen(self.sizes)
        if sizes.ndim != 2 or sizes.shape[0] < 1 or sizes.shape[1] < 1:
            raise ValueError(f"sizes must be an (n, r) matrix with n, r >= 1, got shape {sizes.shape}")
        if not self.segment_duration_s > 0:
            raise ValueError("segment_duration_s must be > 0")
        if not np.all(np.isfinite(sizes)) or np.any(sizes < 0):
            raise ValueError("segment sizes must be finite and >= 0")
        if np.any(np.diff(sizes, axis=1) < 0):
            bad = int(np.argwhere(np.diff(sizes, axis=1) < 0)[0, 0]) + 1
            raise ValueError(f"segment {bad}: sizes must be non-decreasing in representation index")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "segment_duration_s", float(self.segment_duration_s))
        rates = self.level_nominal_rates
        if rates is None:
            rates = sizes.mean(axis=0) / self.segment_duration_s
        rates = _frozen(rates)
        if rates.shape != (sizes.shape[1],):
            raise ValueError("level_nominal_rates must have one entry per representation")
        object.__setattr__(self, "level_nominal_rates", rates)

    @property
    def n(self) -> int:
        return self.sizes.shape[0]

    @property
    def r(self) -> int:
        return self.sizes.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n * self.segment_duration_s

    def to_json(self) -> dict:
        return {
            "segment_duration_s": self.segment_duration_s,
            "sizes": [[_num(x) for x in row] for row in self.sizes],
            "level_nominal_rates": [float(x) for x in self.level_nominal_rates],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Video":
        return cls(obj["segment_duration_s"], np.asarray(obj["sizes"], dtype=np.float64),
                   obj.get("level_nominal_rates"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "Video":
        return cls.from_json(json.loads(Path(path).read_text()))


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() else x


@dataclass(frozen=True, eq=False)
class ThroughputTrace:
    """Goodput in bytes/second, one sample per second from t = 0."""

    samples: np.ndarray

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("trace needs at least one sample")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("goodput samples must be finite and >= 0")
        if not np.any(s > 0):
            raise ValueError("trace must contain at least one positive sample")
        object.__setattr__(self, "samples", s)

    @property
    def duration_s(self) -> int:
        return int(self.samples.size)

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "goodput_Bps"])
            for t, g in enumerate(self.samples):
                w.writerow([t, _num(g)])

    @classmethod
    def load(cls, path) -> "ThroughputTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or "goodput_Bps" not in rows[0]:
            raise ValueError(f"{path}: expected CSV header 't_s,goodput_Bps'")
        for k, row in enumerate(rows):
            if int(float(row["t_s"])) != k:
                raise ValueError(f"{path}: row {k + 2} has t_s={row['t_s']}, expected {k}")
        return cls(np.array([float(row["goodput_Bps"]) for row in rows]))


@dataclass(frozen=True)
class AdaptationPath:
    levels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))
        if any(x < 1 for x in self.levels):
            raise ValueError("quality levels are 1-based")

    def __len__(self) -> int:
        return len(self.levels)

    def validate(self, video: Video) -> None:
        if len(self.levels) != video.n:
            raise ValueError(f"path has {len(self.levels)} levels, video has {video.n} segments")
        if max(self.levels) > video.r:
            raise ValueError(f"level {max(self.levels)} exceeds r={video.r}")

    @property
    def switches(self) -> int:
        return count_switches(self.levels)


def count_switches(levels: Sequence[int]) -> int:
    return sum(1 for a, b in zip(levels, levels[1:]) if a != b)


@dataclass(frozen=True)
class SessionConfig:
    startup_delay_s: float = 5.0
    rebuffer_target_s: float = 10.0
    trace_start_s: int = 0
    epsilon: float = 0.05

    def __post_init__(self):
        if self.startup_delay_s < 0 or self.rebuffer_target_s < 0:
            raise ValueError("startup delay and rebuffer target must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if float(self.trace_start_s) != int(self.trace_start_s) or self.trace_start_s < 0:
            raise ValueError("trace_start_s must be a non-negative whole number of seconds")
        object.__setattr__(self, "trace_start_s", int(self.trace_start_s))

    def check(self, video: Video, trace: ThroughputTrace) -> None:
        if self.epsilon > video.r:
            raise ValueError(f"epsilon must lie in [0, r={video.r}]")
        if self.trace_start_s >= trace.duration_s:
            raise ValueError(f"trace_start_s={self.trace_start_s} outside trace of {trace.duration_s} s")


class VolumeCurve:
    """V(t) and T(v) for a trace replayed from offset `start`, wrapping at its end.

    Goodput is constant within each 1 s sample, so V is piecewise linear. Both
    directions are evaluated so that T(v) is the smallest float t with V(t) >= v;
    comparisons made through either function therefore agree exactly.
    """

    def __init__(self, trace: ThroughputTrace, start: int = 0):
        if not 0 <= start < trace.duration_s:
            raise ValueError(f"start offset {start} outside trace")
        self.rates = np.roll(trace.samples, -int(start))
        self.prefix = np.concatenate([[0.0], np.cumsum(self.rates)])
        self.period = self.rates.size
        self.total = float(self.prefix[-1])

    def volume(self, t: float) -> float:
        if t <= 0:
            return 0.0
        fl = math.floor(t)
        q, u = divmod(fl, self.period)
        return q * self.total + (self.prefix[u] + self.rates[u] * (t - fl))

    def volumes(self, ts) -> np.ndarray:
        ts = np.maximum(np.asarray(ts, dtype=np.float64), 0.0)
        fl = np.floor(ts)
        q, u = np.divmod(fl.astype(np.int64), self.period)
        return q * self.total + (self.prefix[u] + self.rates[u] * (ts - fl))

    def time_for(self, v: float) -> float:
        if v <= 0:
            return 0.0
        q = int(v // self.total)
        rem = v - q * self.total
        if rem <= 0:
            q -= 1
            rem = v - q * self.total
        s = int(np.searchsorted(self.prefix, rem, side="left"))
        s = min(max(s, 1), self.period)
        u = s - 1
        t = q * self.period + u + (rem - self.prefix[u]) / self.rates[u]
        # snap to the smallest float whose V reaches v
        while self.volume(t) < v:
            t = math.nextafter(t, math.inf)
        while t > 0 and self.volume(math.nextafter(t, -math.inf)) >= v:
            t = math.nextafter(t, -math.inf)
        return t


def cumulative_volume(trace: ThroughputTrace, start: int, t: float) -> float:
    return VolumeCurve(trace, start).volume(t)


def inverse_time(trace: ThroughputTrace, start: int, v: float) -> float:
    return VolumeCurve(trace, start).time_for(v)


def deadline(i: int, cfg: SessionConfig, video: Video) -> float:
    """Playout start of segment i (1-based) under uninterrupted playback."""
    if not 1 <= i <= video.n:
        raise IndexError(f"segment index {i} outside 1..{video.n}")
    return cfg.startup_delay_s + (i - 1) * video.segment_duration_s


def deadlines(cfg: SessionConfig, video: Video) -> np.ndarray:
    return np.array([deadline(i, cfg, video) for i in range(1, video.n + 1)])


def prefix_bytes(video: Video, levels: Sequence[int]) -> np.ndarray:
    """Cumulative bytes after each segment, summed left to right."""
    out = np.empty(video.n)
    acc = 0.0
    for i, j in enumerate(levels):
        acc += video.sizes[i, j - 1]
        out[i] = acc
    return out
