"""Desk-scale experiment definitions shared by scripts/ and the acceptance suite.

Training and evaluation videos come from disjoint seed ranges, so the
evaluation set is unseen by the trained policy.

The experiment uses a wider quality gap (epsilon 0.5) than the library default.
Optimal paths then keep slack below the best stall-free quality, which a
policy without knowledge of future goodput can imitate without stalling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .domain import SessionConfig, ThroughputTrace, Video
from .mlp import TrainConfig
from .workload import generate_trace, generate_video, paper_trace_spec, paper_video_spec


@dataclass(frozen=True)
class DeskScale:
    train_videos: int = 10
    train_segments: tuple[int, int] = (100, 140)
    eval_videos: int = 5
    eval_segments: tuple[int, int] = (240, 360)
    eval_seed_base: int = 1000
    starts: str = "0:700:7"
    trace_seed: int = 1
    session: SessionConfig = field(default_factory=lambda: SessionConfig(epsilon=0.5))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.2, epochs=60))

    def _segments(self, k: int, count: int, bounds: tuple[int, int]) -> int:
        lo, hi = bounds
        return lo if count == 1 else lo + round(k * (hi - lo) / (count - 1))

    def trace(self) -> ThroughputTrace:
        return generate_trace(paper_trace_spec(seed=self.trace_seed))

    def training_videos(self) -> list[Video]:
        return [generate_video(paper_video_spec(self._segments(k, self.train_videos, self.train_segments), seed=k))
                for k in range(self.train_videos)]

    def evaluation_videos(self) -> list[Video]:
        return [generate_video(paper_video_spec(self._segments(k, self.eval_videos, self.eval_segments),
                                                seed=self.eval_seed_base + k))
                for k in range(self.eval_videos)]


def write_manifest(directory, videos: list[Video], trace: ThroughputTrace, starts,
                   algorithms: list, session: SessionConfig) -> Path:
    """Save videos and trace next to a run manifest and return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for k, video in enumerate(videos):
        names.append(f"video_{k:02d}.json")
        video.save(directory / names[-1])
    trace.save(directory / "trace.csv")
    manifest = {
        "videos": names,
        "trace": "trace.csv",
        "starts": starts,
        "algorithms": algorithms,
        "session": {"startup_delay_s": session.startup_delay_s,
                    "rebuffer_target_s": session.rebuffer_target_s,
                    "epsilon": session.epsilon},
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path
