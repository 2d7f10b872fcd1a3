from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from hasopt.domain import SessionConfig, ThroughputTrace, Video

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def record(label: str, passed: bool, detail: str = "") -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f" :: {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def random_instance(rng: np.random.Generator, n_max: int = 8, r_max: int = 3):
    """Small integral instance: monotone sizes, short trace, random start and delay."""
    n = int(rng.integers(1, n_max + 1))
    r = int(rng.integers(1, r_max + 1))
    base = rng.integers(1, 60, size=(n, 1))
    steps = rng.integers(0, 50, size=(n, r))
    steps[:, 0] = 0
    sizes = (base + np.cumsum(steps, axis=1)).astype(float)
    samples = rng.integers(0, 80, size=int(rng.integers(1, 12))).astype(float)
    samples[rng.integers(samples.size)] += 1 + rng.integers(0, 80)
    trace = ThroughputTrace(samples)
    cfg = SessionConfig(startup_delay_s=float(rng.integers(0, 5)),
                        trace_start_s=int(rng.integers(trace.duration_s)),
                        epsilon=float(rng.choice([0.0, 0.5, 1.0])))
    return Video(1.0, sizes), trace, cfg


@st.composite
def traces(draw, max_len: int = 12):
    vals = draw(st.lists(st.integers(0, 500), min_size=1, max_size=max_len))
    if not any(vals):
        vals[0] = draw(st.integers(1, 500))
    return ThroughputTrace(np.array(vals, dtype=float))


@st.composite
def instances(draw, n_max: int = 6, r_max: int = 3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(np.random.default_rng(seed), n_max, r_max)
