import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from robustqcd.datagen import (
    MultiScenarioSpec,
    RandomParamLaw,
    ScenarioSpec,
    add_noise,
    gen_multi,
    gen_single,
    nu_label,
    default_ipid_lists,
    scenario_params,
    scenario_rngs,
    single_stream_bundle,
)
from robustqcd.laws import Density


def test_lfl_no_change_mean():
    x = gen_single(ScenarioSpec("lfl", "gaussian", 1.0, 2.0, None, 10_000, seed=1))
    assert abs(x.mean() - 1.0) < 0.03


def test_ipid_poisson_slot_means():
    pre, post = default_ipid_lists("poisson")
    assert pre[0] == 0.4 and pre[-1] == 0.5 and len(pre) == 11
    T = 11
    x = gen_single(ScenarioSpec("ipid", "poisson", pre, post, None, T * 10_000, seed=2))
    slots = x.reshape(-1, T)
    for j, rate in enumerate(pre):
        se = np.sqrt(rate / slots.shape[0])
        assert abs(slots[:, j].mean() - rate) <= 3 * se


def test_change_at_one_has_no_prechange():
    x, p = gen_single(ScenarioSpec("lfl", "gaussian", 0.0, 5.0, 1, 50, seed=3), return_params=True)
    assert np.all(p == 5.0)


def test_prechange_distribution():
    # samples before nu follow the pre-law; KS at 1%
    spec = ScenarioSpec("lfl", "gaussian", 1.0, 3.0, 40, 60, seed=0)
    pre = np.concatenate([gen_single(ScenarioSpec(**{**spec.to_dict(), "seed": s}))[:39] for s in range(300)])
    assert stats.kstest(pre, stats.norm(1, 1).cdf).pvalue > 0.01


def test_exploding_params():
    p = scenario_params(ScenarioSpec("exploding", "gaussian", 0.0, [1.0, 2.0, 3.0], 5, 10))
    assert list(p) == [0, 0, 0, 0, 1, 2, 3, 3, 3, 3]


def test_random_params_inside_interval_and_replayable():
    spec = ScenarioSpec("random", "poisson", (0.4, 0.5), (1.0, 1.1), 30, 200, seed=9)
    p = scenario_params(spec)
    assert np.all((p[:29] >= 0.4) & (p[:29] <= 0.5))
    assert np.all((p[29:] >= 1.0) & (p[29:] <= 1.1))
    # parameter stream is independent of the noise stream
    np.testing.assert_array_equal(p, scenario_params(spec, scenario_rngs(9)[0]))
    x1, p1 = gen_single(spec, return_params=True)
    np.testing.assert_array_equal(p, p1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 50))
def test_determinism(seed, nu):
    spec = ScenarioSpec("random", "gaussian", (0, 1), (2, 3), nu, 60, seed)
    np.testing.assert_array_equal(gen_single(spec), gen_single(spec))


def test_invalid_specs():
    with pytest.raises(ValueError):
        ScenarioSpec("bogus", "gaussian", 0, 1, None, 10)
    with pytest.raises(ValueError):
        ScenarioSpec("lfl", "poisson", 0.0, 1.0, None, 10)
    with pytest.raises(ValueError):
        ScenarioSpec("ipid", "gaussian", [0, 1], [2], None, 10)
    with pytest.raises(ValueError):
        ScenarioSpec("random", "gaussian", (1, 0), (2, 3), None, 10)
    with pytest.raises(ValueError):
        ScenarioSpec("lfl", "gaussian", 0, 1, 0, 10)


def test_spec_roundtrip():
    spec = ScenarioSpec("ipid", "gaussian", [0.0, 0.1], [2.0, 2.1], None, 30, 4)
    again = ScenarioSpec.from_dict({**spec.to_dict(), "nu": "inf"})
    assert again == spec


def test_multi_affected_column_shifts():
    sc = ScenarioSpec("lfl", "gaussian", 1.0, 4.0, 10, 30)
    means = np.zeros((30, 3))
    for r in range(500):
        means += gen_multi(MultiScenarioSpec(3, (1,), sc, Density.gaussian(1.0), 10, 30, seed=r))
    means /= 500
    assert np.all(np.abs(means[:, [0, 2]] - 1.0) < 0.2)
    assert np.all(np.abs(means[:9, 1] - 1.0) < 0.2)
    assert np.all(np.abs(means[9:, 1] - 4.0) < 0.2)


def test_multi_no_change():
    sc = ScenarioSpec("lfl", "gaussian", 0.0, 4.0, None, 100)
    X, P = gen_multi(MultiScenarioSpec(3, (), sc, Density.gaussian(0.0), None, 100, seed=1), return_params=True)
    assert np.all(P == 0.0)
    with pytest.raises(ValueError):
        MultiScenarioSpec(3, (), sc, Density.gaussian(0.0), 5, 100)


def test_multi_random_rates_in_range():
    sc = ScenarioSpec("random", "poisson", (1.0, 1.0), (2.0, 4.0), 10, 80)
    X, P = gen_multi(MultiScenarioSpec(3, (1, 2), sc, Density.poisson(1.0), 10, 80, seed=5), return_params=True)
    post = P[9:, 1:]
    assert np.all((post >= 2.0) & (post <= 4.0))
    assert np.all(P[:, 0] == 1.0)
    assert len(np.unique(post)) > 50


def test_random_param_law():
    law = RandomParamLaw("gaussian", 2.0, 3.0)
    assert law.param_range(7) == (2.0, 3.0)
    with pytest.raises(ValueError):
        RandomParamLaw("gaussian", 3.0, 2.0)
    with pytest.raises(ValueError):
        RandomParamLaw("poisson", 0.0, 1.0)


def test_add_noise():
    z = add_noise(np.zeros(20_000), Density.poisson(1.0), seed=3)
    assert abs(z.mean() - 1.0) < 0.03
    assert add_noise(np.zeros(0), Density.poisson(1.0), 3).size == 0
    np.testing.assert_array_equal(add_noise([1.0, 2.0], Density.gaussian(0), 5), add_noise([1.0, 2.0], Density.gaussian(0), 5))
    with pytest.raises(ValueError):
        add_noise([np.nan], Density.gaussian(0), 1)


def test_bundle_and_labels():
    b = single_stream_bundle("gaussian", 23, 100, 7)
    assert set(b) == {"lfl", "random", "ipid"}
    assert b["lfl"].pre == 1.0 and b["lfl"].post == 2.0
    assert b["ipid"].period == 11
    assert nu_label(None) == "inf" and nu_label(23) == "23"
