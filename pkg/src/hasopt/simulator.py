"""Deterministic playback simulator.

Downloads run back to back from t = 0 (the buffer is unbounded), the decision
for segment i is taken when its download starts, and playout begins at the
startup delay or when segment 1 arrives, whichever is later. An empty buffer
stalls playback until ``rebuffer_target_s`` seconds are buffered or the last
segment has arrived.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .domain import (
    AdaptationPath,
    SessionConfig,
    ThroughputTrace,
    Video,
    VolumeCurve,
    deadline,
    prefix_bytes,
)


class ProtocolViolation(RuntimeError):
    """An adaptation logic returned something other than a level in 1..r."""


@dataclass(frozen=True, eq=False)
class PlayerStateView:
    segment_index: int  # next segment to download, 1-based
    buffer_level_s: float
    now_s: float
    downloaded_levels: np.ndarray
    downloaded_sizes: np.ndarray
    observed_throughputs: np.ndarray  # bytes/s per completed download
    future_sizes: np.ndarray  # sizes[i-1:], rows are segments i..n


class AdaptationLogic(Protocol):
    def decide(self, view: PlayerStateView) -> int: ...


class ScriptedLogic:
    """Replays a fixed path, ignoring the player state."""

    def __init__(self, path: AdaptationPath, video: Video | None = None):
        if video is not None:
            path.validate(video)
        self.path = path
        self.expected_n = len(path)

    def decide(self, view: PlayerStateView) -> int:
        return self.path.levels[view.segment_index - 1]


def script_logic(path: AdaptationPath, video: Video | None = None) -> ScriptedLogic:
    return ScriptedLogic(path, video)


@dataclass(frozen=True)
class Decision:
    decision_time_s: float
    level: int
    size_bytes: float
    download_start_s: float
    download_end_s: float
    observed_throughput: float
    playout_start_s: float


@dataclass(frozen=True)
class SessionLog:
    decisions: tuple[Decision, ...]
    stall_events: tuple[tuple[float, float], ...]
    playout_start_s: float
    playout_end_s: float
    segment_duration_s: float

    @property
    def levels(self) -> list[int]:
        return [d.level for d in self.decisions]

    @property
    def stall_time_s(self) -> float:
        return sum(e - s for s, e in self.stall_events)

    def to_json(self) -> dict:
        def us(x):
            return round(float(x), 6)

        return {
            "segment_duration_s": self.segment_duration_s,
            "playout_start_s": us(self.playout_start_s),
            "playout_end_s": us(self.playout_end_s),
            "stall_events": [[us(s), us(e)] for s, e in self.stall_events],
            "decisions": [
                {k: (v if k == "level" else us(v)) for k, v in asdict(d).items()}
                for d in self.decisions
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "SessionLog":
        return cls(
            tuple(Decision(**d) for d in obj["decisions"]),
            tuple((s, e) for s, e in obj["stall_events"]),
            obj["playout_start_s"],
            obj["playout_end_s"],
            obj["segment_duration_s"],
        )


class _Playout:
    """Playout schedule built incrementally as segments arrive."""

    def __init__(self, n: int, tau: float, startup: float, rebuffer_target: float):
        self.n, self.tau, self.startup = n, tau, startup
        self.need = max(1, math.ceil(rebuffer_target / tau - 1e-12))
        self.arrivals: list[float] = []
        self.starts: list[float] = []
        self.stalls: list[tuple[float, float]] = []
        self._base = (0.0, 0)  # playout start of the current uninterrupted run, its segment
        self._stalled_at: float | None = None
        self._done = 0  # segments fully played before the last buffer query

    def arrive(self, t: float) -> None:
        self.arrivals.append(t)
        self._extend()

    def _extend(self) -> None:
        arrivals, starts = self.arrivals, self.starts
        while len(starts) < self.n:
            k = len(starts)
            if k == 0:
                if not arrivals:
                    return
                p = max(self.startup, arrivals[0])
                starts.append(p)
                self._base = (p, 0)
                continue
            if self._stalled_at is None:
                if len(arrivals) <= k:
                    return
                due = self._base[0] + (k - self._base[1]) * self.tau
                if arrivals[k] <= due:
                    starts.append(due)
                    continue
                self._stalled_at = due
            last = min(k + self.need, self.n) - 1
            if len(arrivals) <= last:
                return
            resume = arrivals[last]
            self.stalls.append((self._stalled_at, resume))
            starts.append(resume)
            self._base = (resume, k)
            self._stalled_at = None

    def buffer_at(self, t: float) -> float:
        starts, tau = self.starts, self.tau
        while self._done < len(starts) and starts[self._done] + tau <= t:
            self._done += 1
        played = self._done * tau
        if self._done < len(starts) and t > starts[self._done]:
            played += t - starts[self._done]
        downloaded = bisect.bisect_right(self.arrivals, t) * tau
        return max(0.0, downloaded - played)


def _check_level(level, r: int) -> int:
    if isinstance(level, (bool, np.bool_)) or not isinstance(level, (int, np.integer)):
        raise ProtocolViolation(f"adaptation logic returned {level!r}, expected an int level")
    if not 1 <= level <= r:
        raise ProtocolViolation(f"adaptation logic returned level {level}, outside 1..{r}")
    return int(level)


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.setflags(write=False)
    return v


def simulate(video: Video, trace: ThroughputTrace, cfg: SessionConfig,
             logic: AdaptationLogic, on_decision=None) -> SessionLog:
    """Play one session. ``on_decision(view, level)`` is called after each choice."""
    cfg.check(video, trace)
    expected = getattr(logic, "expected_n", None)
    if expected is not None and expected != video.n:
        raise ValueError(f"scripted path has {expected} levels, video has {video.n} segments")
    curve = VolumeCurve(trace, cfg.trace_start_s)
    n, r, tau = video.n, video.r, video.segment_duration_s
    playout = _Playout(n, tau, cfg.startup_delay_s, cfg.rebuffer_target_s)
    levels = np.zeros(n, dtype=np.int64)
    sizes = np.zeros(n)
    tputs = np.zeros(n)
    ends = np.zeros(n)
    future = _readonly(video.sizes)
    used = 0.0
    now = 0.0
    for i in range(n):
        view = PlayerStateView(
            segment_index=i + 1,
            buffer_level_s=playout.buffer_at(now),
            now_s=now,
            downloaded_levels=_readonly(levels[:i]),
            downloaded_sizes=_readonly(sizes[:i]),
            observed_throughputs=_readonly(tputs[:i]),
            future_sizes=future[i:],
        )
        level = _check_level(logic.decide(view), r)
        if on_decision is not None:
            on_decision(view, level)
        size = video.sizes[i, level - 1]
        used += size
        end = curve.time_for(used) if size > 0 else now
        if end > now:
            tput = size / (end - now)
        else:  # zero-size segment: report the goodput of the current sample
            tput = float(curve.rates[int(math.floor(now)) % curve.period])
        levels[i], sizes[i], tputs[i], ends[i] = level, size, tput, end
        playout.arrive(end)
        now = end
    starts = playout.starts
    decisions = tuple(
        Decision(
            decision_time_s=float(ends[i - 1]) if i else 0.0,
            level=int(levels[i]),
            size_bytes=float(sizes[i]),
            download_start_s=float(ends[i - 1]) if i else 0.0,
            download_end_s=float(ends[i]),
            observed_throughput=float(tputs[i]),
            playout_start_s=starts[i],
        )
        for i in range(n)
    )
    return SessionLog(decisions, tuple(playout.stalls), starts[0], starts[-1] + tau, tau)


def analytic_session_log(path: AdaptationPath, video: Video, trace: ThroughputTrace,
                         cfg: SessionConfig) -> SessionLog:
    """Session trajectory of a stall-free path, computed directly from V and T.

    Arrival of segment k is T(prefix bytes through k); playout of segment k
    starts at its deadline. Valid only for feasible paths.
    """
    path.validate(video)
    curve = VolumeCurve(trace, cfg.trace_start_s)
    cum = prefix_bytes(video, path.levels)
    tau = video.segment_duration_s
    decisions = []
    prev = 0.0
    for k, level in enumerate(path.levels):
        size = float(video.sizes[k, level - 1])
        end = curve.time_for(cum[k]) if size > 0 else prev
        if end > prev:
            tput = size / (end - prev)
        else:
            tput = float(curve.rates[int(math.floor(prev)) % curve.period])
        p = deadline(k + 1, cfg, video)
        if end > p:
            raise ValueError(f"path is not stall-free: segment {k + 1} arrives at {end} after {p}")
        decisions.append(Decision(prev, level, size, prev, end, tput, p))
        prev = end
    return SessionLog(tuple(decisions), (), decisions[0].playout_start_s,
                      decisions[-1].playout_start_s + tau, tau)
