import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustqcd.detector import (
    CusumState,
    RobustNsState,
    ThresholdSchedule,
    cusum_maxform,
    cusum_step,
    robust_statistic_bruteforce,
    robust_step,
    run_detector,
)
from robustqcd.laws import (
    Density,
    HorizonError,
    LflPair,
    PostChangeLaw,
    PreChangeLaw,
    SupportError,
    constant_lfl,
)

N = Density.gaussian
GAUSS = constant_lfl(N(1), N(2))  # llr(x) = x - 1.5
A5 = ThresholdSchedule.constant(5.0)


def exact_state(lfl, a=A5):
    return RobustNsState(lfl, a, window=None, delta=math.inf)


def lfl_kinds():
    return {
        "constant": GAUSS,
        "periodic": LflPair(PreChangeLaw.periodic([N(0), N(0.5), N(1)]), PostChangeLaw.periodic([N(1.5), N(2), N(2.5)])),
        "change_aligned": LflPair(PreChangeLaw.constant(N(0)), PostChangeLaw.change_aligned([N(0.3), N(0.6), N(1.0), N(1.4)])),
    }


# --- classical CUSUM


def test_cusum_hand_trace():
    # llrs 1, -2, 3
    s = CusumState(GAUSS, A5)
    trace = [cusum_step(s, 0.0).W]
    for x in (2.5, -0.5, 4.5):
        s = cusum_step(s, x)
        trace.append(s.W)
    assert trace[1:] == [1.0, 0.0, 3.0]
    assert [max(v, 0.0) for v in cusum_maxform([1.0, -2.0, 3.0])] == [1.0, 0.0, 3.0]


def test_cusum_neutral_observation():
    s = CusumState(GAUSS, A5)
    assert cusum_step(s, 1.5).W == 0.0
    s.W = 2.25
    assert cusum_step(s, 1.5).W == 2.25


def test_cusum_step_is_pure():
    s = CusumState(GAUSS, A5)
    t = cusum_step(s, 3.0)
    assert s.W == 0.0 and s.n == 0 and t.n == 1


def test_cusum_needs_constant():
    with pytest.raises(ValueError):
        CusumState(lfl_kinds()["periodic"], A5)


def test_cusum_support():
    s = CusumState(constant_lfl(Density.poisson(1), Density.poisson(2)), A5)
    with pytest.raises(SupportError):
        s.step(1.5)


# --- robust statistic


def test_robust_single_negative_candidate():
    s = robust_step(exact_state(GAUSS), 0.5)
    assert s.statistic == -1.0
    assert s.argmax == 1


def test_robust_step_is_pure():
    s = exact_state(GAUSS)
    t = robust_step(s, 2.0)
    assert s.n == 0 and s.sums.size == 0 and t.n == 1


def test_bruteforce_length_one():
    assert robust_statistic_bruteforce([3.0], GAUSS) == [pytest.approx(1.5, abs=1e-15)]


def test_bruteforce_matches_maxform_for_constant():
    rng = np.random.default_rng(1)
    xs = rng.normal(1.3, 1, 60)
    bf = robust_statistic_bruteforce(xs, GAUSS)
    mf = cusum_maxform([x - 1.5 for x in xs])
    np.testing.assert_allclose(bf, mf, atol=1e-12)


@pytest.mark.parametrize("kind", ["constant", "periodic", "change_aligned"])
def test_oracle_equivalence(kind):
    lfl = lfl_kinds()[kind]
    rng = np.random.default_rng({"constant": 11, "periodic": 12, "change_aligned": 13}[kind])
    for _ in range(5):
        xs = rng.normal(1.0, 1.2, 80)
        s = exact_state(lfl)
        fast = [s.step(x) for x in xs]
        np.testing.assert_allclose(fast, robust_statistic_bruteforce(xs, lfl), atol=1e-9, rtol=0)


def test_recursion_collapse_small():
    rng = np.random.default_rng(2)
    xs = rng.normal(1.2, 1, 300)
    r = exact_state(GAUSS)
    c = CusumState(GAUSS, A5)
    for x in xs:
        assert max(r.step(x), 0.0) == c.step(x)


def test_pruned_matches_exact_on_drifting_stream():
    rng = np.random.default_rng(4)
    xs = np.concatenate([rng.normal(0, 1, 3000), rng.normal(2, 1, 200)])
    pruned = RobustNsState(GAUSS, A5, window=200)
    exact = exact_state(GAUSS)
    for x in xs:
        assert pruned.step(x) == pytest.approx(exact.step(x), abs=1e-9)
    assert pruned.sums.size <= 200
    assert pruned.argmax == exact.argmax


def test_tie_break_smallest_k():
    # llr sequence 1, -1, 1: candidates k=1 and k=3 both sum to 1
    s = exact_state(GAUSS)
    for x in (2.5, 0.5, 2.5):
        s.step(x)
    assert s.statistic == 1.0
    assert s.argmax == 1


def test_tabulated_law_horizon():
    lfl = LflPair(PreChangeLaw.tabulated([N(0), N(0), N(0)]), PostChangeLaw.constant(N(1)))
    s = exact_state(lfl)
    for x in (0.1, 0.2, 0.3):
        s.step(x)
    with pytest.raises(HorizonError):
        s.step(0.4)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-3, 5), min_size=2, max_size=25),
    st.integers(0, 24),
    st.floats(0.01, 3),
    st.sampled_from(["constant", "periodic", "change_aligned"]),
)
def test_monotone_in_observations(xs, i, bump, kind):
    lfl = lfl_kinds()[kind]
    i = i % len(xs)
    ys = list(xs)
    ys[i] += bump
    a = robust_statistic_bruteforce(xs, lfl)
    b = robust_statistic_bruteforce(ys, lfl)
    for n in range(i, len(xs)):
        assert b[n] >= a[n] - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=1, max_size=25))
def test_monotone_in_observations_poisson(counts):
    lfl = constant_lfl(Density.poisson(1), Density.poisson(3))
    base = robust_statistic_bruteforce(counts, lfl)
    for i in range(len(counts)):
        up = list(counts)
        up[i] += 1
        for n, (a, b) in enumerate(zip(base, robust_statistic_bruteforce(up, lfl))):
            if n >= i:
                assert b >= a - 1e-12


# --- thresholds and run_detector


def test_threshold_schedules():
    assert ThresholdSchedule.from_alpha(0.1, 6)(1) == pytest.approx(math.log(60))
    assert ThresholdSchedule.from_alpha(0.1, 3)(1) == pytest.approx(math.log(30))
    assert ThresholdSchedule.from_alpha(1 / 150)(9) == pytest.approx(math.log(150))
    tab = ThresholdSchedule.tabulated([1.0, 2.0, 3.0])
    assert tab(2) == 2.0
    with pytest.raises(HorizonError):
        tab(4)
    with pytest.raises(ValueError):
        ThresholdSchedule.tabulated([1.0])
    with pytest.raises(ValueError):
        ThresholdSchedule.constant(-1.0)
    with pytest.raises(ValueError):
        ThresholdSchedule.from_alpha(1.5)


def test_no_detection_on_neutral_stream():
    ev = run_detector([1.5] * 50, exact_state(GAUSS))
    assert not ev.stopped and ev.stop_time is None
    assert len(ev.trace) == 50


def test_crossing_at_seven():
    # llr 0.5 per step, A = 3.25: 3.0 < A at n=6, 3.5 >= A at n=7
    ev = run_detector([2.0] * 20, exact_state(GAUSS, ThresholdSchedule.constant(3.25)))
    assert ev.stopped and ev.stop_time == 7
    assert ev.statistic_at_stop == 3.5
    assert all(s < 3.25 for s in ev.trace[:6])


def test_gaussian_change_single_run():
    rng = np.random.default_rng(23)
    xs = np.concatenate([rng.normal(1, 1, 22), rng.normal(2, 1, 78)])
    ev = run_detector(list(xs), RobustNsState(GAUSS, ThresholdSchedule.constant(math.log(150))))
    assert ev.stopped
    assert 23 <= ev.stop_time <= 60
    assert len(ev.trace) == ev.stop_time


def test_run_detector_horizon_and_empty():
    ev = run_detector([1.5] * 50, exact_state(GAUSS), horizon=10)
    assert len(ev.trace) == 10
    with pytest.raises(ValueError):
        run_detector([], exact_state(GAUSS))


def test_trace_strictly_below_threshold_before_stop():
    rng = np.random.default_rng(8)
    for _ in range(20):
        ev = run_detector(list(rng.normal(1.6, 1, 300)), RobustNsState(GAUSS, A5))
        if ev.stopped:
            assert all(s < a for s, a in zip(ev.trace[:-1], ev.thresholds))
            assert ev.trace[-1] >= ev.thresholds[-1]
