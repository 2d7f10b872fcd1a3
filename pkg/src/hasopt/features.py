"""Scaled feature vectors for imitation learning and corpus construction.

Feature layout, for memory horizon c_m, throughput memory c_ot and r levels:

    [0]                       mean of the last c_ot throughputs / nu
    [1 : 1+c_ot]              last c_ot throughputs / nu, oldest first
    next c_m                  last c_m chosen levels, as level / r
    next c_m                  last c_m downloaded segment sizes / nu
    next c_m * r              sizes of the next c_m segments / nu, segment-major
    [-1]                      buffer level / bl_max

History blocks are right-aligned and zero-padded on the left; the future block
is zero-padded at the end. Everything is clamped to [0, 1].
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import InfeasibleError, SessionConfig, ThroughputTrace, Video
from .optimizer import solve
from .simulator import PlayerStateView, script_logic, simulate


@dataclass(frozen=True)
class ScalingContext:
    nu: float
    bl_max: float = 20.0
    c_m: int = 30
    c_ot: int = 30

    def __post_init__(self):
        if not self.nu > 0 or not self.bl_max > 0:
            raise ValueError("nu and bl_max must be > 0")
        if self.c_m < 1 or self.c_ot < 1:
            raise ValueError("c_m and c_ot must be >= 1")

    def n_features(self, r: int) -> int:
        return 1 + self.c_ot + self.c_m + self.c_m + self.c_m * r + 1

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ScalingContext":
        return cls(**json.loads(Path(path).read_text()))


def feature_names(ctx: ScalingContext, r: int) -> list[str]:
    names = ["tp_avg"]
    names += [f"tp_mem_{k:02d}" for k in range(ctx.c_ot)]
    names += [f"lvl_mem_{k:02d}" for k in range(ctx.c_m)]
    names += [f"size_mem_{k:02d}" for k in range(ctx.c_m)]
    names += [f"fut_s{k:02d}_l{j}" for k in range(ctx.c_m) for j in range(1, r + 1)]
    names.append("buffer")
    return names


def _right_aligned(values: np.ndarray, width: int, scale: float) -> np.ndarray:
    out = np.zeros(width)
    tail = values[-width:]
    out[width - tail.size:] = tail / scale
    return out


def extract(view: PlayerStateView, video: Video, ctx: ScalingContext) -> np.ndarray:
    r = video.r
    tputs = view.observed_throughputs[-ctx.c_ot:]
    future = np.zeros((ctx.c_m, r))
    ahead = view.future_sizes[: ctx.c_m]
    future[: ahead.shape[0]] = ahead / ctx.nu
    vec = np.concatenate([
        [tputs.sum() / ctx.c_ot / ctx.nu],
        _right_aligned(tputs, ctx.c_ot, ctx.nu),
        _right_aligned(np.asarray(view.downloaded_levels, dtype=np.float64), ctx.c_m, r),
        _right_aligned(view.downloaded_sizes, ctx.c_m, ctx.nu),
        future.ravel(),
        [view.buffer_level_s / ctx.bl_max],
    ])
    return np.clip(vec, 0.0, 1.0)


@dataclass
class Corpus:
    features: np.ndarray  # (N, F) float32
    labels: np.ndarray  # (N,) 0-based class
    keys: np.ndarray  # (N, 3): video id, start offset, segment index

    def __len__(self) -> int:
        return self.labels.size

    def save_csv(self, path, ctx: ScalingContext, r: int) -> None:
        header = ",".join(feature_names(ctx, r) + ["label"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row, label in zip(self.features, self.labels):
                fh.write(",".join(f"{x:.9g}" for x in row) + f",{int(label)}\n")

    @classmethod
    def load_csv(cls, path) -> "Corpus":
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
        return cls(data[:, :-1].astype(np.float32), data[:, -1].astype(np.int64),
                   np.zeros((data.shape[0], 3), dtype=np.int64))


class CorpusError(RuntimeError):
    def __init__(self, video_id: int, start: int, cause: Exception):
        super().__init__(f"video {video_id}, start {start}: {cause}")
        self.video_id, self.start, self.cause = video_id, start, cause


def _session_record(video: Video, trace: ThroughputTrace, cfg: SessionConfig) -> dict:
    """Solve, replay the optimal path and keep the raw state at every decision."""
    opt = solve(video, trace, cfg)
    buffers: list[float] = []
    log = simulate(video, trace, cfg, script_logic(opt.path, video),
                   on_decision=lambda view, level: buffers.append(view.buffer_level_s))
    return {
        "levels": np.array(log.levels),
        "sizes": np.array([d.size_bytes for d in log.decisions]),
        "tputs": np.array([d.observed_throughput for d in log.decisions]),
        "buffers": np.array(buffers),
    }


def _job(args):
    vid, video, trace, cfg = args
    try:
        return vid, cfg.trace_start_s, _session_record(video, trace, cfg), None
    except InfeasibleError as exc:
        return vid, cfg.trace_start_s, None, exc


def session_features(record: dict, video: Video, ctx: ScalingContext) -> np.ndarray:
    levels, sizes, tputs, bufs = record["levels"], record["sizes"], record["tputs"], record["buffers"]
    rows = []
    for i in range(video.n):
        view = PlayerStateView(i + 1, float(bufs[i]), 0.0, levels[:i], sizes[:i], tputs[:i],
                               video.sizes[i:])
        rows.append(extract(view, video, ctx))
    return np.array(rows, dtype=np.float32)


def build_corpus(videos: Sequence[Video], trace: ThroughputTrace, starts: Sequence[int],
                 cfg: SessionConfig, ctx: ScalingContext | None = None,
                 workers: int = 1) -> tuple[Corpus, ScalingContext]:
    """Training samples from the optimal path of every (video, start) pair.

    Without ``ctx`` the scaler nu is the largest segment size or observed
    throughput seen anywhere in the corpus.
    """
    jobs = [(vid, video, trace, replace(cfg, trace_start_s=int(s)))
            for vid, video in enumerate(videos) for s in starts]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=4))
    else:
        results = [_job(j) for j in jobs]
    results.sort(key=lambda x: (x[0], x[1]))
    for vid, start, _, exc in results:
        if exc is not None:
            raise CorpusError(vid, start, exc) from exc
    if ctx is None:
        nu = max(max(float(v.sizes.max()) for v in videos),
                 max(float(rec["tputs"].max()) for _, _, rec, _ in results))
        ctx = ScalingContext(nu=nu)
    feats, labels, keys = [], [], []
    for vid, start, rec, _ in results:
        video = videos[vid]
        feats.append(session_features(rec, video, ctx))
        labels.append(rec["levels"] - 1)
        keys.append(np.column_stack([np.full(video.n, vid), np.full(video.n, start),
                                     np.arange(1, video.n + 1)]))
    return Corpus(np.concatenate(feats), np.concatenate(labels).astype(np.int64),
                  np.concatenate(keys).astype(np.int64)), ctx

