import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from spider_stop import LegFunction, SpiderModel, SpiderPoint, VERTEX
from spider_stop.excessive import (
    finiteness_check,
    generator,
    gluing_value,
    is_excessive,
    representing_measure_at_vertex,
    representing_measure_offvertex,
    reward_decomposition,
    scale_derivative,
)
from spider_stop.kernels import (
    green_kernel,
    harmonic_leg_function,
    minimal_excessive_leg_function,
    phi_leg_function,
)
from spider_stop.osp import example71_payoff, linear_payoff, quadratic_payoff


def mixture(model, weights, poles):
    """Convex combination of minimal excessive functions (as a LegFunction)."""
    parts = [minimal_excessive_leg_function(model, p) for p in poles]
    kinks = tuple(k for f in parts for k in f.kinks)
    return LegFunction(
        func=lambda x, leg: sum(w * f(x, leg) for w, f in zip(weights, parts)),
        dx=lambda x, leg, side=1: sum(w * f.dx(x, leg, side) for w, f in zip(weights, parts)),
        kinks=kinks,
    )


def expected_tail(weights, poles, x, leg):
    return sum(w for w, p in zip(weights, poles) if not p.is_vertex and p.leg == leg and p.x > x)


@pytest.mark.parametrize("seed", range(10))
def test_mixture_round_trip(seed, skewed):
    rng = np.random.default_rng(seed)
    k = rng.integers(2, 5)
    poles = [VERTEX]
    for _ in range(k):
        leg = int(rng.integers(1, 4))
        y = math.inf if rng.random() < 0.3 else float(rng.uniform(0.2, 3.0))
        poles.append(SpiderPoint(y, leg))
    weights = rng.dirichlet(np.ones(len(poles)))
    f = mixture(skewed, weights, poles)
    sigma = representing_measure_at_vertex(skewed, f)
    assert_allclose(sigma.vertex_atom, weights[0], atol=1e-5)
    for leg in (1, 2, 3):
        for x in (0.05, 0.5, 1.0, 2.0, 3.5):
            if any(abs(p.x - x) < 1e-9 for p in poles):
                continue
            assert_allclose(sigma.tail(x, leg), expected_tail(weights, poles, x, leg), atol=1e-5)


def test_phi_is_pure_vertex_mass(skewed):
    sigma = representing_measure_at_vertex(skewed, phi_leg_function(skewed))
    assert_allclose(sigma.vertex_atom, 1.0, atol=1e-8)
    for leg in (1, 2, 3):
        assert abs(sigma.tail(1.0, leg)) < 1e-12


def test_vertex_measure_requires_normalization(model3):
    f = phi_leg_function(model3)
    g = LegFunction(func=lambda x, leg: 2 * f(x, leg), dx=lambda x, leg, side=1: 2 * f.dx(x, leg, side))
    with pytest.raises(ValueError):
        representing_measure_at_vertex(model3, g)


def test_offvertex_measure_is_probability(skewed):
    base = mixture(skewed, [0.3, 0.7], [VERTEX, SpiderPoint(2.0, 2)])
    for x0, leg in ((1.0, 2), (0.5, 1)):
        c = base(x0, leg)
        f = LegFunction(func=lambda x, k: base(x, k) / c,
                        dx=lambda x, k, side=1: base.dx(x, k, side) / c, kinks=base.kinks)
        meas = representing_measure_offvertex(skewed, f, SpiderPoint(x0, leg))
        total = meas.upper_tail(x0) + meas.lower_aggregate(x0)
        assert_allclose(total, 1.0, rtol=1e-7)


def test_gluing_values(model3):
    assert_allclose(gluing_value(model3, example71_payoff()), -0.5, atol=1e-12)
    assert abs(gluing_value(model3, harmonic_leg_function(model3, (1, 2, 3)))) < 1e-12
    assert_allclose(gluing_value(model3, phi_leg_function(model3)), -model3.cr, rtol=1e-12)


def psi_plus_one(model):
    return LegFunction(func=lambda x, leg: float(model.psi_killed(x)) + 1.0,
                       dx=lambda x, leg, side=1: float(model.dpsi_killed(x, side)))


def test_rejects_psi_plus_one(model3):
    f = psi_plus_one(model3)
    assert_allclose(gluing_value(model3, f), 1.0, rtol=1e-12)
    rep = is_excessive(model3, f, np.linspace(0.1, 3, 30))
    assert not rep.verdict
    assert rep.failures


@pytest.mark.parametrize("a", [(1, 0, 0), (0, 1, 0), (0.5, 1, 2), (1, 1, 1), (3, 0, 0.1)])
def test_accepts_harmonic(model3, a):
    rep = is_excessive(model3, harmonic_leg_function(model3, a), np.linspace(0.05, 5, 40))
    assert rep.verdict, rep.failures


def test_accepts_minimal_with_pole(skewed):
    f = minimal_excessive_leg_function(skewed, SpiderPoint(1.5, 2))
    assert is_excessive(skewed, f, np.linspace(0.1, 4, 40)).verdict


def test_rejects_negative_function(model3):
    f = LegFunction(func=lambda x, leg: math.exp(-x) - 0.5)
    assert not is_excessive(model3, f, np.linspace(0.1, 3, 20)).verdict


def test_generator_of_fundamental_solution(skewed):
    f = phi_leg_function(skewed)
    for x in (0.3, 1.0, 2.0):
        assert_allclose(generator(skewed, f, x, 2), skewed.r * skewed.phi(x), rtol=1e-5)


def test_scale_derivative_matches_closed_form(model3):
    f = LegFunction(func=lambda x, leg: x ** 3)
    assert_allclose(scale_derivative(model3, f, 1.2, 1), 3 * 1.2 ** 2, rtol=1e-7)


def test_reward_decomposition_linear_quadratic(model3):
    dec = reward_decomposition(model3, linear_payoff((1, 2, 3)))
    assert_allclose(dec.delta0, -2.0, atol=1e-12)
    assert_allclose(dec.density(1.0, 2), 1.0, rtol=1e-9)
    dec = reward_decomposition(model3, quadratic_payoff((1, 2, 3)))
    assert abs(dec.delta0) < 1e-12
    assert_allclose(dec.density(1.5, 3), 3 * (0.5 * 2.25 - 1), rtol=1e-6)


def test_reward_decomposition_kink_atoms(model3):
    dec = reward_decomposition(model3, example71_payoff())
    assert_allclose(dec.delta0, 0.5, atol=1e-12)
    masses = {(p.x, p.leg): m for p, m in dec.atoms}
    # convex kinks: slopes rise by 1/2 at 2 on leg 2 and by 2 at 1/2 on leg 3
    assert_allclose(masses[(2.0, 2)], -0.5 / 3, rtol=1e-9)
    assert_allclose(masses[(0.5, 3)], -2.0 / 3, rtol=1e-9)


def test_integral_form_matches_quadrature(model3):
    from scipy.integrate import quad
    g = quadratic_payoff((1, 2, 3))
    dec = reward_decomposition(model3, g)
    for x, leg in ((0.5, 1), (1.5, 3)):
        val = quad(lambda y: float(model3.phi(y)) * dec.density(y, leg) * 2.0, x, math.inf)[0]
        assert_allclose(dec.integral_form(x, leg), val, rtol=1e-6)


def test_finiteness_examples(model3):
    grid = np.linspace(0.0, 30.0, 61)
    assert finiteness_check(model3, linear_payoff((1, 2, 3)), (1, 1, 1), grid).bounded
    fast = LegFunction(func=lambda x, leg: math.exp(2.0 * x))
    res = finiteness_check(model3, fast, (1, 1, 1), grid)
    assert not res.bounded and res.bound == math.inf


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 4.0), st.integers(1, 3), st.floats(0.05, 0.95))
def test_pole_mixture_is_excessive(y, leg, w):
    m = SpiderModel.brownian(3, p=(0.2, 0.3, 0.5), r=0.7)
    f = mixture(m, [w, 1 - w], [VERTEX, SpiderPoint(y, leg)])
    assert gluing_value(m, f) <= 1e-12
    assert is_excessive(m, f, np.linspace(0.07, 5, 25)).verdict
