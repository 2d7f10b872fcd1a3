"""Exact two-step optimal adaptation.

Step 1 maximises the mean quality of a stall-free path. Step 2 minimises the
number of quality switches among stall-free paths whose mean quality is at
least ``W_opt - epsilon``; remaining ties go to the higher mean quality and then
to the lexicographically smallest level sequence.

Quality sums are integers throughout. Byte sums are exact as long as segment
sizes and goodput samples are integral, which is what the workload generators
produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .domain import (
    AdaptationPath,
    InfeasibleError,
    SessionConfig,
    ThroughputTrace,
    Video,
    VolumeCurve,
    count_switches,
    deadlines,
    prefix_bytes,
)

BRUTE_FORCE_LIMIT = 10**7


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class OptimalResult:
    path: AdaptationPath
    w_opt: float
    switches: int
    step2_mean_quality: float
    q_opt: int  # n * w_opt, exact
    q_total: int  # quality sum of the returned path, exact

    def to_json(self) -> dict:
        return {
            "levels": list(self.path.levels),
            "w_opt": self.w_opt,
            "switches": self.switches,
            "mean_quality": self.step2_mean_quality,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    slack: np.ndarray  # V(D_k) - prefix bytes, per segment
    feasible: bool
    first_violation: int | None  # 1-based segment index


def deadline_volumes(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> np.ndarray:
    cfg.check(video, trace)
    return VolumeCurve(trace, cfg.trace_start_s).volumes(deadlines(cfg, video))


def check_feasibility(path: AdaptationPath, video: Video, trace: ThroughputTrace,
                      cfg: SessionConfig) -> FeasibilityReport:
    if len(path) != video.n:
        raise ValueError(f"path has {len(path)} levels, video has {video.n} segments")
    path.validate(video)
    slack = deadline_volumes(video, trace, cfg) - prefix_bytes(video, path.levels)
    bad = np.flatnonzero(slack < 0)
    return FeasibilityReport(slack, bad.size == 0, int(bad[0]) + 1 if bad.size else None)


def _require_feasible(video, trace, cfg) -> np.ndarray:
    vd = deadline_volumes(video, trace, cfg)
    report = check_feasibility(AdaptationPath([1] * video.n), video, trace, cfg)
    if not report.feasible:
        k = report.first_violation
        raise InfeasibleError(
            f"stalling unavoidable: segment {k} misses its deadline even at the lowest quality "
            f"(short by {-report.slack[k - 1]:.0f} bytes); try a larger startup delay", segment=k)
    return vd


def min_quality_sum(q_opt: int, n: int, epsilon: float) -> int:
    """Smallest integer quality sum Q with Q/n >= q_opt/n - epsilon."""
    eps = Fraction(str(float(epsilon)))
    return max(n, math.ceil(Fraction(q_opt) - n * eps))


def solve_step1_sum(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> int:
    vd = _require_feasible(video, trace, cfg)
    n, r = video.n, video.r
    best = np.full(n * r + 1, np.inf)  # min prefix bytes per exact quality sum
    best[0] = 0.0
    for i in range(n):
        nxt = np.full_like(best, np.inf)
        for j in range(1, r + 1):
            cand = best[: best.size - j] + video.sizes[i, j - 1]
            np.minimum(nxt[j:], cand, out=nxt[j:])
        nxt[nxt > vd[i]] = np.inf
        best = nxt
    return int(np.flatnonzero(np.isfinite(best)).max())


def solve_step1(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> float:
    """Highest stall-free mean quality W_opt."""
    return solve_step1_sum(video, trace, cfg) / video.n


# Step 2 tables. For a switch budget s, G_s(i, j, q) is the largest cumulative
# byte count after segment i (downloaded at level j) from which segments
# i+1..n can still be fetched on time with at most s more switches and a
# quality sum of at least q. With m = n - i segments left, q <= m is always
# met, and q > m*r never is, so only q in [m, m*r] is stored.

def _offsets(n: int, r: int) -> np.ndarray:
    widths = np.array([(n - i) * (r - 1) + 1 for i in range(1, n + 1)], dtype=np.int64)
    return np.concatenate([[0], np.cumsum(r * widths)])


@njit(cache=True)
def _lookup(table, offs, n, r, i, j, q):
    # i 1-based segment, j 0-based level
    m = n - i
    if q > m * r:
        return -np.inf
    if q < m:
        q = m
    w = m * (r - 1) + 1
    return table[offs[i - 1] + j * w + (q - m)]


@njit(cache=True)
def _budget_layer(prev, has_prev, sizes, vd, offs, n, r):
    out = np.empty(offs[n])
    base = offs[n - 1]
    for j in range(r):
        out[base + j] = np.inf
    for i in range(n - 1, 0, -1):
        m = n - i
        w = m * (r - 1) + 1
        base = offs[i - 1]
        vnext = vd[i]
        for j in range(r):
            for qi in range(w):
                q = m + qi
                best = -np.inf
                for jp in range(r):
                    if jp == j:
                        g = _lookup(out, offs, n, r, i + 1, jp, q - (jp + 1))
                    elif has_prev:
                        g = _lookup(prev, offs, n, r, i + 1, jp, q - (jp + 1))
                    else:
                        continue
                    val = min(vnext, g) - sizes[i, jp]
                    if val > best:
                        best = val
                out[base + j * w + qi] = best
    return out


class _Step2Tables:
    def __init__(self, video: Video, vd: np.ndarray):
        self.video = video
        self.vd = np.ascontiguousarray(vd)
        self.sizes = np.ascontiguousarray(video.sizes)
        self.n, self.r = video.n, video.r
        self.offs = _offsets(self.n, self.r)
        self.layers: list[np.ndarray] = []

    def grow(self) -> None:
        has_prev = bool(self.layers)
        prev = self.layers[-1] if has_prev else np.empty(0)
        self.layers.append(_budget_layer(prev, has_prev, self.sizes, self.vd, self.offs, self.n, self.r))

    def limit(self, s: int, i: int, j: int, q: int) -> float:
        return _lookup(self.layers[s], self.offs, self.n, self.r, i, j - 1, q)

    def start_ok(self, s: int, q: int) -> bool:
        return any(min(self.vd[0], self.limit(s, 1, j, q - j)) - self.sizes[0, j - 1] >= 0
                   for j in range(1, self.r + 1))

    def construct(self, s: int, q: int) -> list[int]:
        levels: list[int] = []
        used = 0.0
        for i in range(1, self.n + 1):
            for j in range(1, self.r + 1):
                budget = s - (1 if levels and j != levels[-1] else 0)
                if budget < 0:
                    continue
                cap = min(self.vd[i - 1], self.limit(budget, i, j, q - j)) - self.sizes[i - 1, j - 1]
                if used <= cap:
                    levels.append(j)
                    used += self.sizes[i - 1, j - 1]
                    q -= j
                    s = budget
                    break
            else:
                raise RuntimeError(f"path reconstruction failed at segment {i}")
        return levels


def solve_step2(video: Video, trace: ThroughputTrace, cfg: SessionConfig,
                w_opt: float) -> OptimalResult:
    vd = _require_feasible(video, trace, cfg)
    n = video.n
    q_opt = round(w_opt * n)
    q_min = min_quality_sum(q_opt, n, cfg.epsilon)
    tables = _Step2Tables(video, vd)
    for s in range(n):
        tables.grow()
        if tables.start_ok(s, q_min):
            break
    else:  # pragma: no cover - a step-1 optimal path has at most n-1 switches
        raise RuntimeError("no path meets the quality floor")
    q_best = max(q for q in range(q_min, n * video.r + 1) if tables.start_ok(s, q))
    levels = tables.construct(s, q_best)
    path = AdaptationPath(levels)
    assert count_switches(levels) == s and sum(levels) >= q_best
    return OptimalResult(path, q_opt / n, s, sum(levels) / n, q_opt, sum(levels))


def solve(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> OptimalResult:
    return solve_step2(video, trace, cfg, solve_step1_sum(video, trace, cfg) / video.n)


def _enumerate(n: int, r: int, chunk: int = 100_000):
    """All r**n level sequences in lexicographic order, as 1-based arrays."""
    total = r**n
    powers = r ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        yield (codes[:, None] // powers) % r + 1


def brute_force(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> OptimalResult:
    """Exhaustive reference solver with the same tie-breaks as :func:`solve`."""
    n, r = video.n, video.r
    if r**n > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"r**n = {r}**{n} exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    vd = _require_feasible(video, trace, cfg)
    rows = np.arange(n)
    feasible_q, feasible_sw, feasible_paths = [], [], []
    for paths in _enumerate(n, r):
        used = np.zeros(len(paths))
        ok = np.ones(len(paths), dtype=bool)
        for i in rows:
            used = used + video.sizes[i, paths[:, i] - 1]
            ok &= used <= vd[i]
        keep = paths[ok]
        feasible_paths.append(keep)
        feasible_q.append(keep.sum(axis=1))
        feasible_sw.append((keep[:, 1:] != keep[:, :-1]).sum(axis=1))
    paths = np.concatenate(feasible_paths)
    qs = np.concatenate(feasible_q)
    sws = np.concatenate(feasible_sw)
    q_opt = int(qs.max())
    q_min = min_quality_sum(q_opt, n, cfg.epsilon)
    eligible = qs >= q_min
    s_min = int(sws[eligible].min())
    eligible &= sws == s_min
    q_best = int(qs[eligible].max())
    eligible &= qs == q_best
    levels = paths[np.flatnonzero(eligible)[0]].tolist()  # enumeration is lexicographic
    return OptimalResult(AdaptationPath(levels), q_opt / n, s_min, q_best / n, q_opt, q_best)


def switch_objective(levels) -> float:
    """Half the squared distance between consecutive one-hot rows, summed."""
    levels = list(levels)
    r = max(levels)
    onehot = np.zeros((len(levels), r))
    onehot[np.arange(len(levels)), np.array(levels) - 1] = 1.0
    return 0.5 * float(((onehot[:-1] - onehot[1:]) ** 2).sum())


__all__ = [
    "OptimalResult", "FeasibilityReport", "InstanceTooLarge", "solve", "solve_step1",
    "solve_step2", "brute_force", "check_feasibility", "switch_objective", "min_quality_sum",
    "deadline_volumes",
]
