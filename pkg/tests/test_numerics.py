import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spider_stop.numerics import (
    ConvergenceError,
    NumericalError,
    RootNotBracketed,
    central_derivative,
    find_root_bracketed,
    integrate_leg,
    one_sided_derivative,
    second_derivative,
    solve_system,
)


def test_root_matches_known_value():
    # w tanh w = 1 has the root 1.19967864025773...
    res = find_root_bracketed(lambda w: w * math.tanh(w) - 1.0, 0.5, 3.0)
    assert_allclose(res.root, 1.1996786402577338, atol=1e-12)
    assert abs(res.residual) < 1e-12


def test_root_requires_bracket():
    with pytest.raises(RootNotBracketed) as info:
        find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)
    assert isinstance(info.value, NumericalError)
    assert info.value.state


def test_root_at_endpoint():
    res = find_root_bracketed(lambda x: x - 2.0, 2.0, 5.0)
    assert res.root == 2.0


def test_newton_system():
    F = lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 4.0, x[0] - x[1]])
    sol = solve_system(F, [1.0, 0.5])
    assert_allclose(sol, [math.sqrt(2), math.sqrt(2)], atol=1e-10)


def test_newton_reports_failure():
    F = lambda x: np.array([x[0] ** 2 + 1.0])
    with pytest.raises(ConvergenceError):
        solve_system(F, [1.0], positive=False, maxiter=20)


def test_integrate_semi_infinite():
    assert_allclose(integrate_leg(lambda y: math.exp(-2 * y), 0, math.inf), 0.5, rtol=1e-10)
    # kink at 1 passed as a break point
    val = integrate_leg(lambda y: abs(y - 1.0), 0, 3, points=[1.0])
    assert_allclose(val, 2.5, rtol=1e-12)


def test_finite_differences():
    assert_allclose(central_derivative(np.sin, 0.3), math.cos(0.3), rtol=1e-8)
    assert_allclose(one_sided_derivative(np.exp, 0.0, +1), 1.0, rtol=1e-8)
    assert_allclose(one_sided_derivative(np.abs, 0.0, -1), -1.0, rtol=1e-8)
    assert_allclose(second_derivative(np.cos, 0.0), -1.0, rtol=1e-5)
