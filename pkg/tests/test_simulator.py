import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chisquare

from spider_stop import LegFunction, SpiderModel, SpiderPoint, VERTEX
from spider_stop.kernels import hitting_laplace, phi_leg_function
from spider_stop.osp import ThresholdFamily, resolvent_apply, solve_threshold_system
from spider_stop.simulator import (
    SimConfig,
    simulate_discounted_stop,
    simulate_hitting_laplace,
    simulate_resolvent,
    sample_vertex_choices,
)

SEED = 20240617


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(step=0.0)
    with pytest.raises(ValueError):
        SimConfig(paths=0)
    assert SimConfig(step=0.1, horizon=1.0).max_steps == 100


def test_vertex_choice_is_multinomial():
    m = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5))
    counts = sample_vertex_choices(m, 100_000, seed=7)
    assert counts.sum() == 100_000
    assert chisquare(counts, 100_000 * np.array(m.p)).pvalue > 1e-3


def test_deterministic_given_seed():
    m = SpiderModel.brownian(2)
    cfg = SimConfig(step=0.05, paths=2000, horizon=20.0, seed=SEED)
    a = simulate_hitting_laplace(m, VERTEX, SpiderPoint(1.0, 1), cfg)
    b = simulate_hitting_laplace(m, VERTEX, SpiderPoint(1.0, 1), cfg)
    assert a == b
    c = simulate_hitting_laplace(m, VERTEX, SpiderPoint(1.0, 1),
                                 SimConfig(step=0.05, paths=2000, horizon=20.0, seed=SEED + 1))
    assert c.mean != a.mean


def test_hitting_start_equals_target():
    m = SpiderModel.brownian(2)
    est = simulate_hitting_laplace(m, SpiderPoint(1.0, 1), SpiderPoint(1.0, 1), SimConfig())
    assert est.mean == 1.0 and est.std_error == 0.0


@pytest.mark.parametrize("h", [0.05, 0.025])
def test_hitting_laplace_with_step_halving(h):
    m = SpiderModel.brownian(2, r=0.5)
    est = simulate_hitting_laplace(m, VERTEX, SpiderPoint(1.0, 1),
                                   SimConfig(step=h, paths=20_000, horizon=30.0, seed=SEED))
    assert abs(est.zscore(math.exp(-1.0))) < 4


def test_antithetic_pairs():
    m = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5))
    target = SpiderPoint(0.5, 2)
    est = simulate_hitting_laplace(m, SpiderPoint(0.5, 1), target,
                                   SimConfig(step=0.05, paths=20_000, horizon=30.0, seed=SEED,
                                             antithetic=True))
    assert abs(est.zscore(hitting_laplace(m, SpiderPoint(0.5, 1), target))) < 4


def test_resolvent_of_constant_is_exact():
    m = SpiderModel.brownian(3)
    cfg = SimConfig(step=0.05, paths=200, horizon=10.0, seed=SEED)
    est = simulate_resolvent(m, VERTEX, LegFunction(func=lambda x, leg: 1.0), cfg)
    assert_allclose(est.mean, (1 - math.exp(-m.r * cfg.max_steps * cfg.step ** 2)) / m.r, rtol=1e-9)
    assert est.std_error < 1e-12


def test_resolvent_of_phi_matches_quadrature():
    m = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5))
    f = phi_leg_function(m)
    start = SpiderPoint(0.5, 3)
    est = simulate_resolvent(m, start, f, SimConfig(step=0.05, paths=20_000, horizon=30.0, seed=SEED))
    assert abs(est.zscore(resolvent_apply(m, f, start))) < 4


def test_discounted_stop_matches_value():
    m = SpiderModel.brownian(3)
    sol = solve_threshold_system(m, ThresholdFamily("linear", (1.0, 2.0, 3.0)), verify=False)
    est = simulate_discounted_stop(m, VERTEX, sol.region, sol.payoff,
                                   SimConfig(step=0.01, paths=20_000, horizon=50.0, seed=SEED))
    assert est.censored_fraction == 0.0
    assert abs(est.zscore(sol.value(0.0, 1))) < 4


def test_censoring_flag():
    m = SpiderModel.brownian(2, r=0.5)
    est = simulate_hitting_laplace(m, VERTEX, SpiderPoint(3.0, 1),
                                   SimConfig(step=0.1, paths=2000, horizon=2.0, seed=SEED))
    assert est.horizon_warning and est.censored_fraction > 0.01
    assert est.bias_bound <= math.exp(-1.0) + 1e-12


def test_non_brownian_rejected():
    from spider_stop import drifted_brownian_characteristics
    m = SpiderModel(2, (0.5, 0.5), 0.5, drifted_brownian_characteristics(0.2))
    with pytest.raises(ValueError):
        simulate_hitting_laplace(m, VERTEX, SpiderPoint(1.0, 1), SimConfig(paths=10))
