"""
Excessive functions of a diffusion spider through their representing measures.

An r-excessive ``f`` with ``f(0) = 1`` is a mixture of minimal excessive
functions; the mixing measure can be read off from ``f`` and its one-sided
scale derivatives.  The same bookkeeping applied to a reward ``g`` gives the
decomposition ``g = G_r f + g_r(., 0) delta0`` used by the stopping solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diffusion import LegFunction, SpiderModel, SpiderPoint
from .kernels import dpsi_tilde, harmonic_leg_function, psi_tilde
from .numerics import NumericalError, one_sided_derivative, second_derivative

__all__ = [
    "LegFunction",
    "RepresentingMeasure",
    "OffVertexMeasure",
    "ExcessivityReport",
    "RewardDecomposition",
    "FinitenessResult",
    "scale_derivative",
    "generator",
    "gluing_value",
    "representing_measure_at_vertex",
    "representing_measure_offvertex",
    "is_excessive",
    "reward_decomposition",
    "finiteness_check",
]

FD_STEP = 1e-6


def _safe_step(f: LegFunction, x, leg, side, step):
    """Shrink the stencil so that ``[x, x + 2h]`` (on ``side``) holds no kink."""
    h = step * (abs(x) + 1.0)
    for k in f.kinks_on(leg):
        gap = (k - x) * side
        if 0 < gap <= 2.0 * h:
            h = gap / 2.5
    return h / (abs(x) + 1.0)


def scale_derivative(model: SpiderModel, f: LegFunction, x: float, leg: int, side: int = 1,
                     step: float = FD_STEP) -> float:
    """One-sided derivative of ``f(., leg)`` w.r.t. the scale at ``x``.

    ``side=+1`` gives ``f^+``, ``side=-1`` gives ``f^-``.  At the vertex only
    the right derivative along a leg exists.
    """
    if x == 0 and side < 0:
        raise ValueError("left derivatives do not exist at the vertex")
    if f.dx is not None:
        return float(f.dx(x, leg, side)) / float(model.dscale(x))
    h = _safe_step(f, x, leg, side, step)
    d = one_sided_derivative(lambda t: f(t, leg), x, side, h)
    return float(d) / float(model.dscale(x))


def generator(model: SpiderModel, f: LegFunction, x: float, leg: int,
              step: float = 1e-4) -> float:
    """``(d/dm)(d/dS) f`` at an interior point of a leg; NaN at a kink."""
    if x <= 0:
        raise ValueError("generator is evaluated inside the legs only")
    if any(abs(k - x) < 1e-12 for k in f.kinks_on(leg)):
        return math.nan
    s1 = float(model.dscale(x))
    s2 = float(model.d2scale(x))
    if f.dx is not None and f.d2x is not None:
        d1 = float(f.dx(x, leg, 1))
        d2 = float(f.d2x(x, leg))
    else:
        h = step * (abs(x) + 1.0)
        near = [k for k in f.kinks_on(leg) if abs(k - x) <= 3.0 * h]
        side = 0
        if x <= 3.0 * h or near:
            if near and all(k < x for k in near):
                side = 1
            elif near and all(k > x for k in near) and x > 3.0 * h:
                side = -1
            elif not near:
                side = 1
            else:
                return math.nan
        g = lambda t: f(t, leg)
        d2 = float(second_derivative(g, x, step, side))
        d1 = scale_derivative(model, f, x, leg, side or 1) * s1
    return (d2 / s1 - d1 * s2 / (s1 * s1)) / float(model.chars.speed_density(x))


def gluing_value(model: SpiderModel, f: LegFunction) -> float:
    """``sum_i p_i f^+(0, i)``; non-positive for every excessive ``f``."""
    return math.fsum(model.p[i - 1] * scale_derivative(model, f, 0.0, i, 1)
                     for i in range(1, model.n + 1))


def _wronskian_tail(model, f, x, leg):
    """``f^+ phi - phi^+ f`` at ``x`` on ``leg``."""
    return (scale_derivative(model, f, x, leg, 1) * float(model.phi(x))
            - float(model.dphi(x, 1)) * float(f(x, leg)))


@dataclass(frozen=True)
class RepresentingMeasure:
    """Mixing measure of an excessive function normalized at the vertex.

    ``tail(x, i)`` is the mass of ``(x, inf]`` on leg ``i`` (the point at
    infinity included), ``atom_at(x, i)`` the mass of ``{x}``.
    """

    vertex_atom: float
    tail: Callable[[float, int], float]
    atom_at: Callable[[float, int], float]
    n: int

    def total(self) -> float:
        return self.vertex_atom + math.fsum(self.tail(0.0, i) for i in range(1, self.n + 1))


def _check_normalized(value, what):
    if abs(value - 1.0) > 1e-9:
        raise ValueError(f"{what} must equal 1 (got {value!r}); normalize first")


def representing_measure_at_vertex(model: SpiderModel, f: LegFunction) -> RepresentingMeasure:
    _check_normalized(float(f(0.0, 1)), "f at the vertex")
    cr = model.cr

    def tail(x, leg):
        return model.prob(leg) / cr * _wronskian_tail(model, f, x, leg)

    def atom_at(x, leg):
        if x <= 0:
            raise ValueError("atoms off the vertex need x > 0")
        jump = scale_derivative(model, f, x, leg, -1) - scale_derivative(model, f, x, leg, 1)
        return model.prob(leg) * float(model.phi(x)) / cr * jump

    return RepresentingMeasure(
        vertex_atom=-gluing_value(model, f) / cr, tail=tail, atom_at=atom_at, n=model.n
    )


@dataclass(frozen=True)
class OffVertexMeasure:
    """Partial description of the measure representing ``f`` with ``f(base) = 1``.

    Above the base point only tails on the base leg are available; below it
    only the aggregate of ``(0, x)`` on the base leg, the vertex and all other
    legs.
    """

    base: SpiderPoint
    upper_tail: Callable[[float], float]
    lower_aggregate: Callable[[float], float]


def representing_measure_offvertex(model: SpiderModel, f: LegFunction,
                                   base: SpiderPoint) -> OffVertexMeasure:
    if base.is_vertex:
        raise ValueError("base is the vertex; use representing_measure_at_vertex")
    x0, i0 = base.x, base.leg
    model.check_leg(i0)
    _check_normalized(float(f(x0, i0)), "f at the base point")
    p = model.prob(i0)
    psi0 = float(psi_tilde(model, x0, i0))
    phi0 = float(model.phi(x0))

    def upper_tail(x):
        if x < x0:
            raise ValueError(f"upper tail is defined for x >= {x0}")
        return p * psi0 * _wronskian_tail(model, f, x, i0)

    def lower_aggregate(x):
        if not 0 <= x <= x0:
            raise ValueError(f"lower aggregate is defined for 0 <= x <= {x0}")
        side = -1 if x > 0 else 1
        fm = scale_derivative(model, f, x, i0, side)
        dpsi = float(dpsi_tilde(model, x, i0, side))
        return p * phi0 * (float(f(x, i0)) * dpsi - fm * float(psi_tilde(model, x, i0)))

    return OffVertexMeasure(base=base, upper_tail=upper_tail, lower_aggregate=lower_aggregate)


@dataclass
class ExcessivityReport:
    verdict: bool
    gluing: float
    tails: dict
    grid: np.ndarray
    failures: list = field(default_factory=list)

    def rows(self):
        """``(leg, x, tail, monotonicity residual)`` rows; residual > 0 means increase."""
        out = []
        for leg, vals in self.tails.items():
            prev = None
            for x, t in zip(self.grid, vals):
                out.append((leg, float(x), float(t), 0.0 if prev is None else float(t - prev)))
                prev = t
        return out


def is_excessive(model: SpiderModel, f: LegFunction, grid: Sequence[float],
                 sign_tol: float = 1e-8, mono_tol: float = 1e-6) -> ExcessivityReport:
    """Numerical excessivity test on a grid of positive distances.

    Checks the gluing condition at the vertex and, on every leg, that
    ``x -> (p_i / c_r)(f^+ phi - phi^+ f)`` is non-negative, non-increasing and
    finite.  Non-negativity of ``f`` itself is checked too.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3 or np.any(grid <= 0):
        raise ValueError("need at least 3 positive grid points per leg")
    failures = []
    try:
        glue = gluing_value(model, f)
    except (ArithmeticError, ValueError, NumericalError) as exc:
        glue = math.nan
        failures.append(f"gluing value not computable: {exc}")
    if not glue <= sign_tol:
        failures.append(f"gluing value {glue:.6g} > 0")
    tails = {}
    for leg in range(1, model.n + 1):
        vals = np.array([model.prob(leg) / model.cr * _wronskian_tail(model, f, x, leg)
                         for x in grid])
        tails[leg] = vals
        fvals = np.array([float(f(x, leg)) for x in grid])
        if not np.all(np.isfinite(vals)):
            failures.append(f"leg {leg}: tail not finite")
            continue
        if np.any(fvals < -sign_tol):
            failures.append(f"leg {leg}: f negative (min {fvals.min():.3g})")
        if vals.min() < -sign_tol:
            failures.append(f"leg {leg}: tail negative (min {vals.min():.3g})")
        rise = np.max(np.diff(vals)) if vals.size > 1 else 0.0
        if rise > mono_tol:
            failures.append(f"leg {leg}: tail increases by {rise:.3g}")
    return ExcessivityReport(verdict=not failures, gluing=glue, tails=tails, grid=grid,
                             failures=failures)


@dataclass(frozen=True)
class RewardDecomposition:
    """``g = G_r(density) + sum(mass * g_r(., y)) + g_r(., 0) * delta0``.

    ``atoms`` lists ``(SpiderPoint, mass)`` pairs for kinks of ``g`` away from
    the vertex; they are empty for twice-differentiable rewards.
    """

    delta0: float
    density: LegFunction
    integral_form: Callable[[float, int], float]
    atoms: tuple = ()

    def __iter__(self):
        yield self.delta0
        yield self.density


def reward_decomposition(model: SpiderModel, g: LegFunction) -> RewardDecomposition:
    """Vertex mass and leg density of a reward function.

    ``density = r g - (d/dm)(d/dS) g`` inside the legs (NaN where ``g`` is not
    twice differentiable) and ``delta0 = -gluing_value(g)``.  A kink at ``y``
    on leg ``k`` carries the point mass ``p_k (g^-(y) - g^+(y))``.  ``integral_form``
    returns ``g^+ phi - g phi^+``, which equals the integral of ``phi * density``
    against ``m`` over ``(x, inf)`` whenever the decomposition holds.
    """
    r = model.r

    def density(x, leg):
        if x <= 0:
            return math.nan
        try:
            return r * float(g(x, leg)) - generator(model, g, x, leg)
        except (ArithmeticError, ValueError):
            return math.nan

    def integral_form(x, leg):
        return _wronskian_tail(model, g, x, leg)

    atoms = []
    for y, k in g.kinks:
        if y <= 0 or not math.isfinite(y):
            continue
        jump = scale_derivative(model, g, y, k, -1) - scale_derivative(model, g, y, k, 1)
        if abs(jump) > 1e-12:
            atoms.append((SpiderPoint(y, k), model.prob(k) * jump))
    return RewardDecomposition(
        delta0=-gluing_value(model, g),
        density=LegFunction(func=density, kinks=g.kinks, label=f"density({g.label})"),
        integral_form=integral_form,
        atoms=tuple(atoms),
    )


@dataclass
class FinitenessResult:
    bounded: bool
    bound: float
    ratios: np.ndarray
    grid: np.ndarray
    message: str = ""


def finiteness_check(model: SpiderModel, g: LegFunction, a: Sequence[float],
                     grid: Sequence[float], tol: float = 1e-12) -> FinitenessResult:
    """Heuristic test that ``g / H`` stays bounded for the harmonic ``H`` given by ``a``.

    The ratio is sampled on every leg; it is declared bounded when, on each
    leg, it does not increase over the last decade of the grid.  This is a
    finite-sample proxy for an asymptotic statement.
    """
    H = harmonic_leg_function(model, a)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(grid < 0):
        raise ValueError("grid must hold at least two non-negative points")
    xmax = grid.max()
    tail = grid >= xmax / 10.0
    ratios = np.empty((model.n, grid.size))
    growing = []
    for leg in range(1, model.n + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            ratios[leg - 1] = [float(g(x, leg)) / float(H(x, leg)) for x in grid]
        last = ratios[leg - 1][tail]
        if not np.all(np.isfinite(last)) or np.any(np.diff(last) > tol * np.maximum(1, np.abs(last[:-1]))):
            growing.append(leg)
    if growing:
        return FinitenessResult(False, math.inf, ratios, grid,
                                f"ratio g/H grows on legs {growing}")
    return FinitenessResult(True, float(np.nanmax(ratios)), ratios, grid)
