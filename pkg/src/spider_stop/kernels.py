"""
Resolvent kernel, hitting-time transforms and minimal excessive functions.

All densities are with respect to the spider speed measure
``p_k m(dy)`` on leg ``k`` unless a docstring says otherwise.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffusion import LegFunction, SpiderModel, SpiderPoint

__all__ = [
    "Branch",
    "GreenKernelValue",
    "psi_tilde",
    "dpsi_tilde",
    "green_kernel",
    "green_density",
    "transition_density_brownian",
    "skew_psi",
    "hitting_laplace",
    "minimal_excessive",
    "harmonic_function",
    "phi_leg_function",
    "minimal_excessive_leg_function",
    "harmonic_leg_function",
]

# switch to log-space products beyond this exponent magnitude
LOG_SWITCH = 500.0


class Branch(enum.Enum):
    SAME_LEG_X_BELOW = "same-leg-x-below"
    SAME_LEG_X_ABOVE = "same-leg-x-above"
    CROSS_LEG = "cross-leg"
    VERTEX = "vertex-involved"


@dataclass(frozen=True)
class GreenKernelValue:
    value: float
    branch: Branch

    def __float__(self):
        return self.value


def psi_tilde(model: SpiderModel, x, leg: int):
    """Increasing solution ``psi_killed(x) / p_leg + phi(x) / c_r``."""
    return model.psi_killed(x) / model.prob(leg) + model.phi(x) / model.cr


def dpsi_tilde(model: SpiderModel, x, leg: int, side: int = 1):
    """Scale derivative of :func:`psi_tilde`."""
    return model.dpsi_killed(x, side) / model.prob(leg) + model.dphi(x, side) / model.cr


def _log_psi_tilde(model, x, leg):
    ch = model.chars
    return np.logaddexp(
        ch.log_psi_killed(x, model.r) - math.log(model.prob(leg)),
        ch.log_phi(x, model.r) - math.log(model.cr),
    )


def _needs_logs(model, x, y):
    ch = model.chars
    if ch.log_phi is None or ch.log_psi_killed is None:
        return False
    big = max(abs(float(ch.log_phi(x, model.r))), abs(float(ch.log_phi(y, model.r))))
    return big > LOG_SWITCH


def green_density(model: SpiderModel, x: float, i: int, y: float, j: int) -> float:
    """Scalar kernel ``g_r((x,i),(y,j))``; used inside quadratures."""
    if x == 0 or y == 0 or i != j:
        if _needs_logs(model, x, y):
            lp = model.chars.log_phi
            return math.exp(lp(x, model.r) + lp(y, model.r) - math.log(model.cr))
        return float(model.phi(x) * model.phi(y)) / model.cr
    lo, hi = (x, y) if x <= y else (y, x)
    if _needs_logs(model, lo, hi):
        return math.exp(model.chars.log_phi(hi, model.r) + _log_psi_tilde(model, lo, i))
    return float(model.phi(hi) * psi_tilde(model, lo, i))


def green_kernel(model: SpiderModel, source: SpiderPoint, target: SpiderPoint) -> GreenKernelValue:
    """Green kernel of the spider, a density w.r.t. the speed measure.

    Symmetric in its arguments and continuous, including at the vertex.
    """
    for pt in (source, target):
        if pt.is_infinite:
            raise ValueError("green_kernel needs finite points")
        if not pt.is_vertex:
            model.check_leg(pt.leg)
    x, i, y, j = source.x, source.leg, target.x, target.leg
    if source.is_vertex or target.is_vertex:
        branch = Branch.VERTEX
    elif i != j:
        branch = Branch.CROSS_LEG
    elif x <= y:
        branch = Branch.SAME_LEG_X_BELOW
    else:
        branch = Branch.SAME_LEG_X_ABOVE
    return GreenKernelValue(green_density(model, x, i, y, j), branch)


def transition_density_brownian(model: SpiderModel, t: float, source: SpiderPoint,
                                target: SpiderPoint) -> float:
    """Brownian-spider transition density at time ``t``.

    The value is a density with respect to *length* on the target leg: its
    integral over all legs is one.  Its time-Laplace transform is the Green
    kernel times ``2 p_j``, the speed-measure density of the target leg.
    """
    if not model.chars.is_brownian:
        raise ValueError("closed-form transition densities exist only for the Brownian spider")
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    x, y = source.x, target.x
    j = target.leg
    norm = 1.0 / math.sqrt(2.0 * math.pi * t)
    image = math.exp(-((x + y) ** 2) / (2.0 * t))
    if source.is_vertex or target.is_vertex or source.leg != j:
        return 2.0 * model.prob(j) * norm * image
    direct = math.exp(-((x - y) ** 2) / (2.0 * t))
    return norm * (direct - image) + 2.0 * model.prob(j) * norm * image


def skew_psi(model: SpiderModel, x: float, principal_leg: int) -> float:
    """Increasing solution of the skew diffusion obtained by unfolding the spider.

    ``x >= 0`` lives on ``principal_leg``; ``x < 0`` stands for the remaining
    legs lumped together.
    """
    if x >= 0:
        return float(psi_tilde(model, x, principal_leg))
    return float(model.phi(-x)) / model.cr


def hitting_laplace(model: SpiderModel, source: SpiderPoint, target: SpiderPoint) -> float:
    """``E_source[exp(-r H_target)]`` for the first hitting time of ``target``."""
    if source == target:
        return 1.0
    x = source.x
    if target.is_vertex:
        return float(model.phi(x))
    y, j = target.x, target.leg
    model.check_leg(j)
    if source.is_vertex or source.leg != j:
        return float(model.phi(x)) * skew_psi(model, 0.0, j) / skew_psi(model, y, j)
    if x <= y:
        return skew_psi(model, x, j) / skew_psi(model, y, j)
    if _needs_logs(model, x, y):
        lp = model.chars.log_phi
        return math.exp(lp(x, model.r) - lp(y, model.r))
    return float(model.phi(x) / model.phi(y))


def minimal_excessive(model: SpiderModel, at: SpiderPoint, pole: SpiderPoint) -> float:
    """Minimal r-excessive function with the given pole, equal to 1 at the vertex.

    ``pole`` may be a point at infinity, ``SpiderPoint(math.inf, k)``.
    """
    if at.is_vertex:
        return 1.0
    x, i = at.x, at.leg
    if pole.is_infinite:
        k = pole.leg
        model.check_leg(k)
        if i == k:
            return model.cr * float(psi_tilde(model, x, i))
        return float(model.phi(x))
    denom = green_density(model, 0.0, pole.leg, pole.x, pole.leg)
    return green_density(model, x, i, pole.x, pole.leg) / denom


def _check_coefficients(model, a):
    a = np.asarray(a, dtype=float)
    if a.shape != (model.n,):
        raise ValueError(f"expected {model.n} coefficients, got shape {a.shape}")
    if np.any(a < 0):
        raise ValueError("harmonic coefficients must be non-negative")
    if not np.any(a > 0):
        raise ValueError("all-zero coefficients give the trivial function")
    return a


def harmonic_function(model: SpiderModel, a: Sequence[float], at: SpiderPoint) -> float:
    """Positive r-harmonic function ``sum_k a_k u(., inf_k)`` evaluated at ``at``."""
    a = _check_coefficients(model, a)
    x = at.x
    if at.is_vertex:
        return float(a.sum())
    i = at.leg
    return float(a[i - 1] * model.cr / model.prob(i) * model.psi_killed(x)
                 + model.phi(x) * a.sum())


# LegFunction builders --------------------------------------------------------

def phi_leg_function(model: SpiderModel) -> LegFunction:
    return LegFunction(
        func=lambda x, leg: float(model.phi(x)),
        dx=lambda x, leg, side=1: float(model.dphi(x, side) * model.dscale(x)),
        label="phi",
    )


def harmonic_leg_function(model: SpiderModel, a: Sequence[float]) -> LegFunction:
    a = _check_coefficients(model, a)
    total = float(a.sum())

    def func(x, leg):
        return float(a[leg - 1] * model.cr / model.prob(leg) * model.psi_killed(x)
                     + model.phi(x) * total)

    def dx(x, leg, side=1):
        ds = a[leg - 1] * model.cr / model.prob(leg) * model.dpsi_killed(x, side) \
            + model.dphi(x, side) * total
        return float(ds * model.dscale(x))

    return LegFunction(func=func, dx=dx, label=f"harmonic{tuple(a.tolist())}")


def minimal_excessive_leg_function(model: SpiderModel, pole: SpiderPoint) -> LegFunction:
    """:func:`minimal_excessive` with ``pole`` fixed, as a :class:`LegFunction`."""
    if pole.is_infinite:
        a = np.zeros(model.n)
        a[pole.leg - 1] = 1.0
        f = harmonic_leg_function(model, a)
        return LegFunction(func=f.func, dx=f.dx, label=f"u(inf@{pole.leg})")
    if pole.is_vertex:
        f = phi_leg_function(model)
        return LegFunction(func=f.func, dx=f.dx, label="u(0)")
    y, k = pole.x, pole.leg
    cr = model.cr
    scale_up = cr * float(psi_tilde(model, y, k)) / float(model.phi(y))

    def func(x, leg):
        if leg == k and x <= y:
            return cr * float(psi_tilde(model, x, k))
        if leg == k:
            return scale_up * float(model.phi(x))
        return float(model.phi(x))

    def dx(x, leg, side=1):
        if leg == k and (x < y or (x == y and side < 0)):
            ds = cr * dpsi_tilde(model, x, k, side)
        elif leg == k:
            ds = scale_up * model.dphi(x, side)
        else:
            ds = model.dphi(x, side)
        return float(ds * model.dscale(x))

    return LegFunction(func=func, dx=dx, kinks=((y, k),), label=f"u({y}@{k})")
