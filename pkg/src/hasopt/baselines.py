"""Threshold-based reference logics: a conservative rate-based one and an aggressive one.

Neither is a reproduction of a published algorithm; they stand in for the two
behavioural families (smoothed, buffer-gated vs. last-sample rate matching).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Video
from .simulator import PlayerStateView


@dataclass(frozen=True)
class RateBasedConfig:
    safety_factor: float = 0.9
    smoothing_window: int = 5
    upswitch_min_buffer_s: float = 10.0

    def __post_init__(self):
        if not 0 < self.safety_factor <= 1:
            raise ValueError("safety_factor must lie in (0, 1]")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")


class RateBasedLogic:
    def __init__(self, cfg: RateBasedConfig, video: Video):
        self.cfg = cfg
        self.nominal = video.sizes.mean(axis=0) / video.segment_duration_s

    def target(self, view: PlayerStateView) -> int:
        recent = view.observed_throughputs[-self.cfg.smoothing_window:]
        budget = self.cfg.safety_factor * float(np.mean(recent))
        return max(1, int(np.searchsorted(self.nominal, budget, side="right")))

    def decide(self, view: PlayerStateView) -> int:
        if view.observed_throughputs.size == 0:
            return 1
        prev = int(view.downloaded_levels[-1])
        want = self.target(view)
        if want > prev:
            return want if view.buffer_level_s >= self.cfg.upswitch_min_buffer_s else prev
        if want < prev:
            if view.buffer_level_s < 0.5 * self.cfg.upswitch_min_buffer_s:
                return want
            return prev - 1
        return prev


class AggressiveLogic:
    """Highest level whose next segment would download at the last observed rate."""

    def __init__(self, video: Video):
        self.tau = video.segment_duration_s

    def decide(self, view: PlayerStateView) -> int:
        if view.observed_throughputs.size == 0:
            return 1
        last = float(view.observed_throughputs[-1])
        rates = view.future_sizes[0] / self.tau
        return max(1, int(np.searchsorted(rates, last, side="right")))


def rate_based_logic(cfg: RateBasedConfig, video: Video) -> RateBasedLogic:
    return RateBasedLogic(cfg, video)


def aggressive_logic(video: Video) -> AggressiveLogic:
    return AggressiveLogic(video)
