from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from hasopt.domain import (
    AdaptationPath,
    InfeasibleError,
    SessionConfig,
    ThroughputTrace,
    Video,
    count_switches,
)
from hasopt.optimizer import (
    InstanceTooLarge,
    brute_force,
    check_feasibility,
    min_quality_sum,
    solve,
    solve_step1,
    switch_objective,
)
from hasopt.workload import generate_trace, generate_video, paper_trace_spec, paper_video_spec

from conftest import instances, random_instance


def _unit_instance(eps):
    # one byte per second, two levels of 1 and 2 bytes, deadlines 2, 3, 4, 5:
    # the prefix budget admits exactly one level-2 segment
    video = Video(1.0, np.tile([1.0, 2.0], (4, 1)))
    trace = ThroughputTrace(np.ones(10))
    return video, trace, SessionConfig(startup_delay_s=2, epsilon=eps)


def test_hand_instance_exact_quality():
    video, trace, cfg = _unit_instance(0.0)
    res = solve(video, trace, cfg)
    assert res.q_opt == 5 and res.w_opt == 1.25
    assert res.path.levels == (1, 1, 1, 2)
    assert res.switches == 1


def test_hand_instance_epsilon_removes_switch():
    video, trace, cfg = _unit_instance(0.25)
    res = solve(video, trace, cfg)
    assert res.path.levels == (1, 1, 1, 1)
    assert res.switches == 0 and res.w_opt == 1.25 and res.step2_mean_quality == 1.0


def test_single_segment():
    video = Video(1.0, np.array([[100.0, 200.0]]))
    trace = ThroughputTrace(np.full(5, 150.0))
    res = solve(video, trace, SessionConfig(startup_delay_s=1))
    assert res.path.levels == (1,) and res.switches == 0
    res = solve(video, trace, SessionConfig(startup_delay_s=2))
    assert res.path.levels == (2,)


def test_infeasible_instance_names_segment():
    video = Video(1.0, np.array([[10.0], [10.0], [500.0]]))
    trace = ThroughputTrace(np.full(10, 10.0))
    with pytest.raises(InfeasibleError) as err:
        solve(video, trace, SessionConfig(startup_delay_s=1))
    assert err.value.segment == 3
    with pytest.raises(InfeasibleError):
        brute_force(video, trace, SessionConfig(startup_delay_s=1))


def test_zero_startup_needs_zero_first_segment():
    video = Video(1.0, np.array([[0.0, 5.0], [3.0, 4.0]]))
    trace = ThroughputTrace(np.full(4, 10.0))
    res = solve(video, trace, SessionConfig(startup_delay_s=0))
    assert res.path.levels[0] == 1
    with pytest.raises(InfeasibleError):
        solve(Video(1.0, np.array([[1.0, 5.0]])), trace, SessionConfig(startup_delay_s=0))


def test_brute_force_guard():
    video = Video(1.0, np.ones((15, 5)))
    with pytest.raises(InstanceTooLarge):
        brute_force(video, ThroughputTrace(np.ones(3)), SessionConfig())


def test_min_quality_sum_is_exact():
    assert min_quality_sum(15, 10, 0.1) == 14
    assert min_quality_sum(15, 10, 0.0) == 15
    assert min_quality_sum(10, 10, 1.0) == 10
    # 0.3 * 10 = 3 exactly, despite binary floating point
    assert min_quality_sum(20, 10, 0.3) == 17


@settings(max_examples=300, deadline=None)
@given(instances())
def test_solver_matches_brute_force(inst):
    video, trace, cfg = inst
    try:
        ref = brute_force(video, trace, cfg)
    except InfeasibleError:
        with pytest.raises(InfeasibleError):
            solve(video, trace, cfg)
        return
    assert solve(video, trace, cfg) == ref


@settings(max_examples=150, deadline=None)
@given(instances())
def test_returned_path_invariants(inst):
    video, trace, cfg = inst
    try:
        res = solve(video, trace, cfg)
    except InfeasibleError:
        return
    assert check_feasibility(res.path, video, trace, cfg).feasible
    assert res.q_total == sum(res.path.levels)
    assert Fraction(res.q_total, video.n) >= Fraction(res.q_opt, video.n) - Fraction(str(cfg.epsilon))
    assert res.q_total <= res.q_opt
    assert res.switches == count_switches(res.path.levels)
    assert switch_objective(res.path.levels) == res.switches


@settings(max_examples=100, deadline=None)
@given(instances(n_max=7))
def test_larger_epsilon_never_adds_switches(inst):
    video, trace, cfg = inst
    try:
        counts = [solve(video, trace, SessionConfig(cfg.startup_delay_s, trace_start_s=cfg.trace_start_s,
                                                    epsilon=e)).switches
                  for e in (0.0, 0.25, 0.5, 1.0, 2.0) if e <= video.r]
    except InfeasibleError:
        return
    assert counts == sorted(counts, reverse=True)


def test_switch_objective_equals_switch_count():
    rng = np.random.default_rng(0)
    for _ in range(200):
        levels = rng.integers(1, 6, size=rng.integers(1, 30)).tolist()
        assert switch_objective(levels) == count_switches(levels)


def test_check_feasibility_reports_first_violation():
    video = Video(1.0, np.array([[1.0, 3.0], [1.0, 3.0], [1.0, 3.0]]))
    trace = ThroughputTrace(np.full(5, 2.0))
    cfg = SessionConfig(startup_delay_s=1)
    assert check_feasibility(AdaptationPath([1, 1, 1]), video, trace, cfg).feasible
    rep = check_feasibility(AdaptationPath([1, 2, 2]), video, trace, cfg)
    assert not rep.feasible and rep.first_violation == 3
    np.testing.assert_array_equal(rep.slack, [2 - 1, 4 - 4, 6 - 7])


def test_medium_instance_is_consistent():
    video = generate_video(paper_video_spec(120, seed=11))
    trace = generate_trace(paper_trace_spec())
    cfg = SessionConfig(trace_start_s=140)
    res = solve(video, trace, cfg)
    assert res.w_opt == solve_step1(video, trace, cfg)
    assert check_feasibility(res.path, video, trace, cfg).feasible
    assert res.q_total >= min_quality_sum(res.q_opt, video.n, cfg.epsilon)


def test_random_instances_helper_is_reproducible():
    a = random_instance(np.random.default_rng(1))
    b = random_instance(np.random.default_rng(1))
    np.testing.assert_array_equal(a[0].sizes, b[0].sizes)
    assert a[2] == b[2]


def test_generous_trace_reaches_top_level():
    video = Video(1.0, np.array([[5.0, 10.0, 20.0]] * 9))
    trace = ThroughputTrace(np.full(4, 1e6))
    res = solve(video, trace, SessionConfig(epsilon=0.0))
    assert res.w_opt == 3 and res.path.levels == (3,) * 9 and res.switches == 0


def test_only_lowest_level_fits():
    # V(D_1) = 50 with T0 = 1 at 50 B/s
    video = Video(1.0, np.array([[10.0, 100.0]]))
    res = solve(video, ThroughputTrace(np.full(3, 50.0)), SessionConfig(startup_delay_s=1))
    assert res.w_opt == 1.0


@settings(max_examples=100, deadline=None)
@given(instances(n_max=7))
def test_epsilon_r_gives_best_constant_path(inst):
    video, trace, cfg = inst
    cfg = SessionConfig(cfg.startup_delay_s, trace_start_s=cfg.trace_start_s, epsilon=float(video.r))
    try:
        res = solve(video, trace, cfg)
    except InfeasibleError:
        return
    feasible_const = [j for j in range(1, video.r + 1)
                      if check_feasibility(AdaptationPath([j] * video.n), video, trace, cfg).feasible]
    assert res.switches == 0
    assert res.path.levels == (max(feasible_const),) * video.n


def test_feasibility_slack_signs():
    video = Video(1.0, np.array([[10.0, 100.0]] * 3))
    generous = check_feasibility(AdaptationPath([1, 1, 1]), video, ThroughputTrace(np.full(5, 1e4)), SessionConfig())
    assert generous.feasible and np.all(generous.slack >= 0)
    tight = check_feasibility(AdaptationPath([2, 1, 1]), video, ThroughputTrace(np.full(5, 50.0)),
                              SessionConfig(startup_delay_s=1))
    assert tight.slack[0] < 0 and tight.first_violation == 1 and not tight.feasible
