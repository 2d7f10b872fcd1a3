"""Synthetic goodput traces and video manifests.

Both generators draw from numpy's PCG64 generator seeded explicitly, so output
is bit-reproducible for a given seed. Sizes and goodput samples are rounded to
whole bytes, which keeps all downstream byte arithmetic exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import MBPS, ThroughputTrace, Video

PAPER_LEVEL_RATES_MBPS = (0.1, 0.23, 0.36, 0.68, 1.33)


@dataclass(frozen=True)
class TraceSpec:
    mean_rate: float  # bytes/s
    cv: float
    ac1: float
    duration_s: int
    seed: int = 0

    def __post_init__(self):
        if not self.mean_rate > 0:
            raise ValueError("mean_rate must be > 0")
        if self.cv < 0:
            raise ValueError("cv must be >= 0")
        if not 0 <= self.ac1 < 1:
            raise ValueError("ac1 must lie in [0, 1)")
        if self.duration_s < 1:
            raise ValueError("duration_s must be >= 1")
        if self.cv == 0 and self.ac1 > 0:
            raise ValueError("a constant trace (cv=0) cannot carry autocorrelation (ac1>0)")


@dataclass(frozen=True)
class VideoSpec:
    n_segments: int
    level_rates: tuple[float, ...]  # bytes/s, strictly increasing
    burstiness: float = 0.5
    seed: int = 0
    segment_duration_s: float = 1.0
    mean_scene_s: float = 15.0

    def __post_init__(self):
        rates = tuple(float(x) for x in self.level_rates)
        object.__setattr__(self, "level_rates", rates)
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if not rates or any(b <= a for a, b in zip(rates, rates[1:])) or rates[0] <= 0:
            raise ValueError("level_rates must be positive and strictly increasing")
        if self.burstiness < 0:
            raise ValueError("burstiness must be >= 0")


def lag1_autocorr(x: np.ndarray) -> float:
    d = x - x.mean()
    den = float(d @ d)
    return float(d[1:] @ d[:-1]) / den if den > 0 else 0.0


def _shape(innovations: np.ndarray, phi: float, sigma: float, mean: float, cv: float) -> np.ndarray:
    x = np.empty_like(innovations)
    x[0] = sigma * innovations[0]
    scale = sigma * math.sqrt(1.0 - phi * phi)
    for t in range(1, x.size):
        x[t] = phi * x[t - 1] + scale * innovations[t]
    y = np.exp(x)
    sd = y.std()
    if sd > 0:
        y = mean + (y - y.mean()) * (mean * cv / sd)
    else:
        y = np.full_like(y, mean)
    return np.maximum(y, 0.0)


def generate_trace(spec: TraceSpec) -> ThroughputTrace:
    """Log-space AR(1) goodput trace with the requested mean, CV and lag-1 autocorrelation.

    The lognormal parameters follow from (cv, ac1) in closed form. Because a
    finite sample is biased, the AR coefficient is then refined by bisection
    on the same innovation sequence until the empirical lag-1 autocorrelation
    matches; an affine rescale pins the empirical mean and CV.
    """
    if spec.cv == 0:
        return ThroughputTrace(np.full(spec.duration_s, float(round(spec.mean_rate))))
    rng = np.random.default_rng(spec.seed)
    innovations = rng.standard_normal(spec.duration_s)
    sigma2 = math.log1p(spec.cv**2)
    sigma = math.sqrt(sigma2)
    phi = math.log1p(spec.ac1 * math.expm1(sigma2)) / sigma2 if spec.ac1 > 0 else 0.0

    def shaped(p):
        return _shape(innovations, p, sigma, spec.mean_rate, spec.cv)

    if spec.ac1 > 0 and spec.duration_s > 2:
        lo, hi = 0.0, 0.999
        if lag1_autocorr(shaped(lo)) < spec.ac1 < lag1_autocorr(shaped(hi)):
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if lag1_autocorr(shaped(mid)) < spec.ac1:
                    lo = mid
                else:
                    hi = mid
            phi = 0.5 * (lo + hi)
    samples = np.round(shaped(phi))
    if not np.any(samples > 0):
        samples[0] = 1.0
    return ThroughputTrace(samples)


def generate_video(spec: VideoSpec) -> Video:
    """Segment sizes with scene-wise bit-rate modulation shared by all levels."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_segments
    tau = spec.segment_duration_s
    p_cut = min(1.0, tau / spec.mean_scene_s)
    cuts = rng.random(n) < p_cut
    cuts[0] = True
    scene = np.cumsum(cuts) - 1
    draws = rng.uniform(1.0 - spec.burstiness, 1.0 + spec.burstiness, size=int(scene[-1]) + 1)
    factor = np.maximum(draws[scene], 0.0)
    if spec.burstiness > 0 and factor.mean() > 0:
        factor = factor / factor.mean()
    else:
        factor = np.ones(n)
    rates = np.asarray(spec.level_rates)
    sizes = np.round(factor[:, None] * rates[None, :] * tau)
    sizes = np.maximum.accumulate(sizes, axis=1)
    return Video(tau, sizes, rates)


def paper_trace_spec(seed: int = 1, duration_s: int = 720) -> TraceSpec:
    return TraceSpec(0.67 * MBPS, 0.38, 0.80, duration_s, seed)


def paper_video_spec(n_segments: int, seed: int, burstiness: float = 0.5) -> VideoSpec:
    return VideoSpec(n_segments, tuple(x * MBPS for x in PAPER_LEVEL_RATES_MBPS), burstiness, seed)
