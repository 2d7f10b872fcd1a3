import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hasopt.domain import MBPS
from hasopt.workload import (
    PAPER_LEVEL_RATES_MBPS,
    TraceSpec,
    VideoSpec,
    generate_trace,
    generate_video,
    lag1_autocorr,
    paper_trace_spec,
    paper_video_spec,
)


def test_trace_is_deterministic_per_seed():
    a = generate_trace(paper_trace_spec(seed=3))
    b = generate_trace(paper_trace_spec(seed=3))
    c = generate_trace(paper_trace_spec(seed=4))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_zero_cv_gives_constant_trace():
    trace = generate_trace(TraceSpec(50_000.0, 0.0, 0.0, 30, seed=9))
    np.testing.assert_array_equal(trace.samples, np.full(30, 50_000.0))


def test_zero_cv_with_autocorrelation_is_rejected():
    with pytest.raises(ValueError):
        TraceSpec(50_000.0, 0.0, 0.5, 30)


def test_paper_trace_statistics_single_seed():
    spec = paper_trace_spec(seed=1)
    x = generate_trace(spec).samples
    assert x.size == 720
    assert abs(x.mean() / spec.mean_rate - 1) <= 0.02
    assert abs(x.std() / x.mean() / 0.38 - 1) <= 0.10
    assert abs(lag1_autocorr(x) - 0.80) <= 0.05
    assert np.all(x >= 0) and np.all(x == np.round(x))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.0, 0.9), st.integers(0, 10_000))
def test_trace_matches_requested_statistics(cv, ac1, seed):
    x = generate_trace(TraceSpec(1e6, cv, ac1, 2000, seed)).samples
    assert abs(x.mean() / 1e6 - 1) <= 0.02
    assert abs(x.std() / x.mean() / cv - 1) <= 0.10
    assert abs(lag1_autocorr(x) - ac1) <= 0.05


def test_zero_burstiness_reproduces_nominal_sizes():
    rates = tuple(r * MBPS for r in PAPER_LEVEL_RATES_MBPS)
    video = generate_video(VideoSpec(40, rates, burstiness=0.0, seed=2))
    np.testing.assert_array_equal(video.sizes, np.tile(np.round(np.array(rates)), (40, 1)))


def test_paper_video_level_means_within_five_percent():
    video = generate_video(paper_video_spec(300, seed=0))
    target = np.array(PAPER_LEVEL_RATES_MBPS) * MBPS
    got = video.sizes.mean(axis=0) / video.segment_duration_s
    np.testing.assert_array_less(np.abs(got / target - 1), 0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.floats(0, 1.5), st.integers(0, 2**31))
def test_video_sizes_monotone_and_integral(n, b, seed):
    video = generate_video(VideoSpec(n, (1000.0, 2000.0, 4000.0), burstiness=b, seed=seed))
    assert video.sizes.shape == (n, 3)
    assert np.all(np.diff(video.sizes, axis=1) >= 0)
    assert np.all(video.sizes >= 0) and np.all(video.sizes == np.round(video.sizes))


def test_video_is_deterministic_per_seed():
    a = generate_video(paper_video_spec(100, seed=5))
    b = generate_video(paper_video_spec(100, seed=5))
    np.testing.assert_array_equal(a.sizes, b.sizes)


def test_video_spec_validation():
    with pytest.raises(ValueError):
        VideoSpec(10, (2.0, 1.0))
    with pytest.raises(ValueError):
        VideoSpec(0, (1.0,))
    with pytest.raises(ValueError):
        VideoSpec(10, (1.0,), burstiness=-0.1)
