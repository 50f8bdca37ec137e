import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from spider_stop import SpiderModel, SpiderPoint, VERTEX, drifted_brownian_characteristics
from spider_stop.numerics import find_root_bracketed
from spider_stop.osp import (
    LegSet,
    StoppingRegion,
    StoppingSolution,
    ThresholdFamily,
    assemble_value,
    boundary_residual,
    example71_case,
    example71_payoff,
    linear_payoff,
    resolvent_apply,
    riesz_value,
    scalar_threshold,
    smooth_fit_check,
    solve_example71,
    solve_threshold_system,
    threshold_bounds,
    uniqueness_sweep,
    verify_solution,
    vertex_in_continuation,
)
from spider_stop.kernels import phi_leg_function
from spider_stop.diffusion import LegFunction

LINEAR = ThresholdFamily("linear", (1.0, 2.0, 3.0))
QUADRATIC = ThresholdFamily("quadratic", (1.0, 2.0, 3.0))


# --- regions -----------------------------------------------------------------

def test_region_from_thresholds():
    reg = StoppingRegion.from_thresholds([1.0, 2.0])
    assert reg.contains(1.5, 1) and not reg.contains(1.5, 2)
    assert not reg.vertex_included
    assert_allclose(reg.thresholds(), [1.0, 2.0])
    comp = reg.complement()
    assert comp.vertex_included and comp.contains(0.5, 2)
    assert sorted((p.x, p.leg, s) for p, s in reg.boundary_points()) == [(1.0, 1, -1), (2.0, 2, -1)]


def test_region_touching_vertex_requires_vertex():
    with pytest.raises(ValueError):
        StoppingRegion((((0.0, 1.0),), ()), False)
    assert VERTEX in StoppingRegion.everything(3)


# --- the symmetric problem -----------------------------------------------------

def test_scalar_threshold_roots():
    m = SpiderModel.brownian(3)
    assert_allclose(scalar_threshold(m, "linear"), 1.1996786402577338, atol=1e-10)
    w = find_root_bracketed(lambda w: w * math.tanh(w) - 2.0, 1.0, 4.0).root
    assert_allclose(scalar_threshold(m, "quadratic"), w, atol=1e-10)


def test_assemble_value_one_dimensional_oracle():
    # two legs with equal weights and payoff |x|: the classical line problem
    m = SpiderModel.brownian(2, r=0.5)
    sol = solve_threshold_system(m, "linear", A=(1.0, 1.0))
    z = 1.1996786402577338
    assert_allclose(sol.thresholds, [z, z], atol=1e-10)
    for x in (0.0, 0.4, 1.0, 1.5, 3.0):
        ref = z * math.cosh(x) / math.cosh(z) if x < z else x
        for leg in (1, 2):
            assert_allclose(sol.value(x, leg), ref, rtol=1e-10)


# --- reference thresholds ------------------------------------------------------

def test_linear_thresholds(model3):
    sol = solve_threshold_system(model3, LINEAR)
    assert_allclose(sol.thresholds, [1.4816, 1.2041, 1.0628], atol=5e-4)
    assert sol.diagnostics["verification"].passed
    assert sol.diagnostics["reference_regime"]


def test_quadratic_thresholds(model3):
    sol = solve_threshold_system(model3, QUADRATIC)
    assert_allclose(sol.thresholds, [2.16987, 2.06543, 2.02250], atol=5e-5)
    assert sol.diagnostics["verification"].passed
    assert sol.diagnostics["sign_margin"] >= 0


def test_quadrature_agrees_with_closed_form(model3):
    for fam in (LINEAR, QUADRATIC):
        a = solve_threshold_system(model3, fam, method="closed-form", verify=False)
        b = solve_threshold_system(model3, fam, method="quadrature", verify=False)
        assert_allclose(a.thresholds, b.thresholds, atol=1e-7)


def test_value_matches_potential_representation(model3):
    sol = solve_threshold_system(model3, LINEAR, verify=False)
    for pt in (VERTEX, SpiderPoint(0.7, 1), SpiderPoint(1.1, 3), SpiderPoint(2.0, 2)):
        assert_allclose(riesz_value(model3, sol.payoff, sol.region, pt),
                        sol.value(pt.x, max(pt.leg, 1)), rtol=1e-8)
    assert_allclose(sol.value(0.0, 1), 1.34146258, atol=1e-7)


def test_not_reference_regime_flagged():
    m = SpiderModel.brownian(3, r=0.7)
    sol = solve_threshold_system(m, LINEAR, verify=False)
    assert not sol.diagnostics["reference_regime"]


# --- invariants ----------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 20.0))
def test_scaling_the_coefficients_leaves_thresholds(c):
    m = SpiderModel.brownian(3)
    a = solve_threshold_system(m, LINEAR, verify=False).thresholds
    b = solve_threshold_system(m, ThresholdFamily("linear", (c, 2 * c, 3 * c)), verify=False).thresholds
    assert_allclose(a, b, atol=1e-9)


@pytest.mark.parametrize("r", [0.1, 0.5, 3.0])
def test_thresholds_scale_like_one_over_theta(r):
    base = solve_threshold_system(SpiderModel.brownian(3), QUADRATIC, verify=False).thresholds
    z = solve_threshold_system(SpiderModel.brownian(3, r=r), QUADRATIC, verify=False).thresholds
    assert_allclose(z * math.sqrt(2 * r), base, rtol=1e-9)


def test_monotone_in_coefficient(model3):
    prev = None
    for a1 in (0.5, 1.0, 1.5, 2.5):
        z = solve_threshold_system(model3, ThresholdFamily("linear", (a1, 2.0, 3.0)),
                                   verify=False).thresholds
        if prev is not None:
            assert z[0] < prev[0]
        prev = z


@pytest.mark.parametrize("fam", [LINEAR, QUADRATIC, ThresholdFamily("linear", (1.0, 1.1, 5.0))])
def test_bounds_hold(model3, fam):
    z = solve_threshold_system(model3, fam, verify=False).thresholds
    lo, hi = threshold_bounds(model3, fam)
    assert np.all(lo <= z + 1e-10) and np.all(z <= hi + 1e-10)


def test_uniqueness_sweep_single_sign_change(model3):
    sol = solve_threshold_system(model3, LINEAR, verify=False)
    assert uniqueness_sweep(model3, sol) == {1: 1, 2: 1, 3: 1}


def test_drifted_spider_solves_and_verifies():
    m = SpiderModel(3, (0.2, 0.3, 0.5), 0.7, drifted_brownian_characteristics(0.3))
    sol = solve_threshold_system(m, LINEAR)
    assert sol.diagnostics["method"] == "quadrature"
    assert sol.diagnostics["verification"].passed, sol.diagnostics["verification"].failed()
    assert np.max(np.abs(sol.diagnostics["equation_residuals"])) < 1e-8


# --- verification battery ------------------------------------------------------

def _wrong(model, z):
    region = StoppingRegion.from_thresholds(z)
    g = LINEAR.payoff()
    return StoppingSolution(region=region, value=assemble_value(model, region, g), payoff=g,
                            thresholds=np.asarray(z))


def test_perturbed_threshold_fails_boundary_equation(model3):
    z = solve_threshold_system(model3, LINEAR, verify=False).thresholds.copy()
    z[1] += 0.1
    rep = verify_solution(model3, LINEAR.payoff(), _wrong(model3, z))
    assert not rep.checks["boundary_equation"]
    assert not rep.passed


def test_wrong_threshold_breaks_smooth_fit(model3):
    z = solve_threshold_system(model3, LINEAR, verify=False).thresholds.copy()
    z[0] += 0.2
    sol = _wrong(model3, z)
    assert smooth_fit_check(model3, sol, LINEAR.payoff(), SpiderPoint(z[0], 1)) > 1e-2


def test_smooth_fit_small_at_solution(model3):
    sol = solve_threshold_system(model3, QUADRATIC)
    assert max(sol.diagnostics["smooth_fit"].values()) < 1e-4
    with pytest.raises(ValueError):
        smooth_fit_check(model3, sol, sol.payoff, VERTEX)


def test_boundary_residual_vanishes(model3):
    sol = solve_threshold_system(model3, LINEAR, verify=False)
    for i, z in enumerate(sol.thresholds):
        assert abs(boundary_residual(model3, sol.payoff, sol.region, SpiderPoint(z, i + 1))) < 1e-9


def test_vertex_in_continuation(model3):
    assert vertex_in_continuation(model3, LINEAR.payoff())
    assert not vertex_in_continuation(model3, example71_payoff())


# --- the three-leg example -------------------------------------------------------

def test_example71_case_a():
    sol = solve_example71(8.0)
    theta = 4.0
    assert sol.label == "a"
    assert_allclose(sol.diagnostics["thresholds"]["x2"], 2 - 1 / theta, atol=1e-8)
    assert_allclose(sol.diagnostics["thresholds"]["x3"], 0.5 - 1 / theta, atol=1e-8)
    assert sol.diagnostics["verification"].passed


@pytest.mark.parametrize("r", [0.2, 0.5, 1.0, 2.0])
def test_example71_case_b(r):
    sol = solve_example71(r)
    assert sol.label == "b"
    assert_allclose(sol.diagnostics["thresholds"]["x2"], 2 - 1 / math.sqrt(2 * r), atol=1e-8)
    assert sol.verified


def test_example71_case_c():
    sol = solve_example71(0.125)
    assert sol.label == "c"
    assert abs(sol.diagnostics["thresholds"]["z1"]) < 1e-8
    sol = solve_example71(0.05)
    z = sol.diagnostics["thresholds"]["z1"]
    assert z > 0 and sol.diagnostics["K"] > 1
    assert_allclose(sol.value(0.0, 2), sol.diagnostics["K"], rtol=1e-10)
    assert sol.diagnostics["verification"].passed


@pytest.mark.parametrize("edge,below,above", [(0.125, "c", "b"), (2.0, "b", "a")])
def test_example71_case_boundaries(edge, below, above):
    assert example71_case(edge - 1e-6) == below
    assert example71_case(edge + 1e-6) == above


def test_example71_value_is_majorant():
    for r in (0.05, 0.5, 8.0):
        sol = solve_example71(r, verify=False)
        g = sol.payoff
        for leg in (1, 2, 3):
            for x in np.linspace(0, 4, 41):
                assert sol.value(x, leg) >= g(x, leg) - 1e-12


# --- resolvent -----------------------------------------------------------------

def test_resolvent_of_constant(skewed):
    one = LegFunction(func=lambda x, leg: 1.0)
    for pt in (VERTEX, SpiderPoint(1.3, 2)):
        assert_allclose(resolvent_apply(skewed, one, pt), 1 / skewed.r, rtol=1e-9)


def test_resolvent_restricted_to_set(model3):
    one = LegFunction(func=lambda x, leg: 1.0)
    target = LegSet((((1.0, math.inf),), (), ()), False)
    # 1/r times the Laplace transform of hitting 1@1 from the vertex, by symmetry of the leg
    val = resolvent_apply(model3, one, VERTEX, restrict=target)
    from spider_stop.kernels import hitting_laplace
    inside = resolvent_apply(model3, one, SpiderPoint(1.0, 1), restrict=target)
    assert_allclose(val, hitting_laplace(model3, VERTEX, SpiderPoint(1.0, 1)) * inside, rtol=1e-8)


def test_resolvent_rejects_non_integrable(model3):
    from spider_stop.numerics import IntegrationError
    fast = LegFunction(func=lambda x, leg: math.exp(3.0 * x))
    with pytest.raises(IntegrationError):
        resolvent_apply(model3, fast, VERTEX)


def test_continuation_for_spread_coefficients(model3):
    fam = ThresholdFamily("linear", (1.0, 1e12, 1.0))
    sol = solve_threshold_system(model3, fam)
    assert sol.diagnostics["continuation_steps"] > 0
    assert sol.diagnostics["verification"].passed
    # the dominant leg stops at the one-leg-against-the-rest threshold of (0, 1, 0)
    ref = solve_threshold_system(model3, ThresholdFamily("linear", (1e-9, 1.0, 1e-9)), verify=False)
    assert_allclose(sol.thresholds[1], ref.thresholds[1], atol=1e-6)
