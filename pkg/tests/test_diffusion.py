import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spider_stop import (
    VERTEX,
    SpiderModel,
    SpiderPoint,
    available_characteristics,
    brownian_characteristics,
    drifted_brownian_characteristics,
    get_characteristics,
    register_characteristics,
    validate_characteristics,
)


def test_brownian_constants():
    for r in (0.125, 0.5, 2.0, 8.0):
        m = SpiderModel.brownian(2, r=r)
        theta = math.sqrt(2 * r)
        assert_allclose(m.theta, theta, rtol=1e-15)
        assert_allclose(m.cr, theta, rtol=1e-15)
        assert_allclose(m.phi(1.3), math.exp(-1.3 * theta), rtol=1e-14)
        assert_allclose(m.psi_killed(1.3), math.sinh(1.3 * theta) / theta, rtol=1e-14)


def test_fundamental_solutions_normalized():
    for chars in (brownian_characteristics(), drifted_brownian_characteristics(0.4)):
        m = SpiderModel(3, (0.2, 0.3, 0.5), 0.7, chars)
        assert_allclose(m.phi(0.0), 1.0)
        assert_allclose(m.psi_killed(0.0), 0.0, atol=1e-15)
        assert_allclose(m.dpsi_killed(0.0), 1.0, rtol=1e-12)
        assert_allclose(-m.dphi(0.0), m.cr, rtol=1e-12)


def test_validate_characteristics_passes_for_builtins():
    for chars in (brownian_characteristics(), drifted_brownian_characteristics(0.3)):
        rep = validate_characteristics(chars, r=0.5, grid=np.linspace(0.1, 5, 25))
        assert rep.ok, rep.failures()


def test_probabilities_parsed_and_checked():
    m = SpiderModel(3, ("1/3", "1/3", "1/3"), 0.5)
    assert_allclose(m.p, [1 / 3] * 3)
    m = SpiderModel.brownian(4)
    assert_allclose(sum(m.p), 1.0)
    with pytest.raises(ValueError):
        SpiderModel(2, (0.5, 0.6), 0.5)
    with pytest.raises(ValueError):
        SpiderModel(2, (1.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        SpiderModel(2, (0.5, 0.5), 0.0)
    with pytest.raises(ValueError):
        SpiderModel(3, (0.5, 0.5), 0.5)


def test_legs_are_one_based(model3):
    assert_allclose(model3.prob(1), 1 / 3)
    with pytest.raises(ValueError):
        model3.prob(0)
    with pytest.raises(ValueError):
        model3.prob(4)


def test_vertex_identification():
    assert SpiderPoint(0.0, 1) == SpiderPoint(0.0, 3) == VERTEX
    assert hash(SpiderPoint(0.0, 2)) == hash(VERTEX)
    assert SpiderPoint(1.0, 1) != SpiderPoint(1.0, 2)
    assert SpiderPoint(math.inf, 2).is_infinite
    with pytest.raises(ValueError):
        SpiderPoint(-1.0, 1)


def test_registry_roundtrip():
    assert {"brownian", "drifted_brownian"} <= set(available_characteristics())
    chars = get_characteristics("drifted_brownian", mu=0.25)
    assert chars.params["mu"] == 0.25
    register_characteristics("bm-alias", brownian_characteristics)
    assert get_characteristics("bm-alias").is_brownian
    with pytest.raises(KeyError):
        get_characteristics("no-such-diffusion")


def test_drifted_reduces_to_brownian_at_zero_drift():
    a = SpiderModel(2, (0.5, 0.5), 0.5, drifted_brownian_characteristics(0.0))
    b = SpiderModel.brownian(2)
    xs = np.linspace(0, 4, 9)
    assert_allclose(a.phi(xs), b.phi(xs), rtol=1e-12)
    assert_allclose(a.psi_killed(xs), b.psi_killed(xs), rtol=1e-12, atol=1e-15)
    assert_allclose(a.cr, b.cr, rtol=1e-12)
