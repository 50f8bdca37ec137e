"""
Optimal stopping of a diffusion spider.

Two solver families are provided:

* :func:`solve_example71` -- the three-leg Brownian problem with payoff
  ``1 + x``, ``(1 - x/2)^+``, ``(1 - 2x)^+`` whose stopping region is connected
  and changes shape at ``r = 1/8`` and ``r = 2``;
* :func:`solve_threshold_system` -- per-leg thresholds ``{x >= z_i}`` for the
  linear (``A_i x``) and quadratic (``A_i x^2``) payoff families, obtained from
  the boundary equations of the Riesz-type representation of the value.

Values are assembled by harmonic pasting (:func:`assemble_value`) and can be
checked against the potential representation (:func:`riesz_value`) and the
verification battery (:func:`verify_solution`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .diffusion import VERTEX, LegFunction, SpiderModel, SpiderPoint
from .excessive import (
    gluing_value,
    is_excessive,
    reward_decomposition,
    scale_derivative,
)
from .kernels import green_density, psi_tilde
from .numerics import (
    ConvergenceError,
    IntegrationError,
    NumericalError,
    find_root_bracketed,
    integrate_leg,
    one_sided_derivative,
    solve_system,
)

__all__ = [
    "LegSet",
    "StoppingRegion",
    "StoppingSolution",
    "ThresholdFamily",
    "VerificationReport",
    "example71_payoff",
    "linear_payoff",
    "quadratic_payoff",
    "resolvent_apply",
    "riesz_value",
    "boundary_residual",
    "vertex_in_continuation",
    "example71_case",
    "solve_example71",
    "solve_spider_example71",
    "threshold_equations",
    "scalar_threshold",
    "threshold_bounds",
    "solve_threshold_system",
    "assemble_value",
    "verify_solution",
    "smooth_fit_check",
    "uniqueness_sweep",
]


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

def _normalize_intervals(ivs) -> tuple:
    out = []
    for a, b in ivs:
        a, b = float(a), float(b)
        if not (0.0 <= a <= b) or math.isnan(b):
            raise ValueError(f"bad interval [{a}, {b}]")
        out.append((a, b))
    out.sort()
    for (a0, b0), (a1, b1) in zip(out, out[1:]):
        if a1 <= b0:
            raise ValueError(f"intervals [{a0}, {b0}] and [{a1}, {b1}] overlap")
    return tuple(out)


@dataclass(frozen=True)
class LegSet:
    """A union of intervals on each leg, plus the vertex or not.

    ``intervals[leg - 1]`` is a sorted tuple of ``(a, b)`` pairs (``b`` may be
    ``inf``).  Closed/open endpoints are not distinguished: every use of a
    :class:`LegSet` is insensitive to finitely many points.
    """

    intervals: tuple
    vertex_included: bool

    def __post_init__(self):
        object.__setattr__(self, "intervals",
                           tuple(_normalize_intervals(ivs) for ivs in self.intervals))

    @property
    def n(self) -> int:
        return len(self.intervals)

    def intervals_on(self, leg: int) -> tuple:
        return self.intervals[leg - 1]

    def contains(self, x: float, leg: int = 1) -> bool:
        if x == 0:
            return self.vertex_included
        return any(a <= x <= b for a, b in self.intervals[leg - 1])

    def __contains__(self, pt: SpiderPoint) -> bool:
        return self.contains(pt.x, pt.leg)

    def is_empty(self) -> bool:
        return not self.vertex_included and not any(self.intervals)


@dataclass(frozen=True)
class StoppingRegion(LegSet):
    """Closed stopping region; an interval touching 0 forces the vertex in."""

    def __post_init__(self):
        super().__post_init__()
        touches = any(ivs and ivs[0][0] == 0.0 for ivs in self.intervals)
        if touches and not self.vertex_included:
            raise ValueError("an interval touches 0 but the vertex is excluded")

    @classmethod
    def everything(cls, n: int) -> "StoppingRegion":
        return cls(tuple(((0.0, math.inf),) for _ in range(n)), True)

    @classmethod
    def from_thresholds(cls, z: Sequence[float]) -> "StoppingRegion":
        """``{x >= z_i on leg i}``; a zero threshold puts the vertex in."""
        z = [float(v) for v in z]
        return cls(tuple(((v, math.inf),) for v in z), any(v == 0.0 for v in z))

    def complement(self) -> LegSet:
        comp = []
        for ivs in self.intervals:
            gaps, lo = [], 0.0
            for a, b in ivs:
                if a > lo:
                    gaps.append((lo, a))
                lo = b
            if lo < math.inf:
                gaps.append((lo, math.inf))
            comp.append(tuple(gaps))
        return LegSet(tuple(comp), not self.vertex_included)

    def boundary_points(self) -> list:
        """Boundary points off the vertex as ``(SpiderPoint, side)`` pairs.

        ``side = -1`` when the continuation region lies to the left of the
        point (a left endpoint of a stopping interval), ``+1`` when it lies to
        the right.  Isolated points have both and are listed twice.
        """
        out = []
        for leg, ivs in enumerate(self.intervals, start=1):
            for a, b in ivs:
                if a > 0:
                    out.append((SpiderPoint(a, leg), -1))
                if b < math.inf:
                    out.append((SpiderPoint(b, leg), 1))
        return out

    def thresholds(self) -> Optional[np.ndarray]:
        """Per-leg thresholds when the region is a union of upper rays."""
        z = []
        for ivs in self.intervals:
            if len(ivs) != 1 or ivs[0][1] != math.inf:
                return None
            z.append(ivs[0][0])
        return np.array(z)


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

def example71_payoff() -> LegFunction:
    """``1 + x`` on leg 1, ``(1 - x/2)^+`` on leg 2, ``(1 - 2x)^+`` on leg 3."""
    slopes = {1: 1.0, 2: -0.5, 3: -2.0}
    ends = {2: 2.0, 3: 0.5}

    def func(x, leg):
        if leg == 1:
            return 1.0 + x
        return max(1.0 + slopes[leg] * x, 0.0)

    def dx(x, leg, side=1):
        if leg == 1:
            return 1.0
        e = ends[leg]
        if x < e or (x == e and side < 0):
            return slopes[leg]
        return 0.0

    return LegFunction(func=func, dx=dx, d2x=lambda x, leg: 0.0,
                       kinks=((2.0, 2), (0.5, 3)), label="example71")


def _coefficients(A) -> np.ndarray:
    A = np.asarray([float(Fraction(str(a))) if isinstance(a, str) else float(a) for a in A])
    if A.ndim != 1 or A.size == 0 or np.any(~np.isfinite(A)) or np.any(A <= 0):
        raise ValueError(f"coefficients must be positive and finite, got {A}")
    return A


def linear_payoff(A: Sequence[float]) -> LegFunction:
    A = _coefficients(A)
    return LegFunction(func=lambda x, leg: A[leg - 1] * x,
                       dx=lambda x, leg, side=1: A[leg - 1],
                       d2x=lambda x, leg: 0.0, label=f"linear{tuple(A.tolist())}")


def quadratic_payoff(A: Sequence[float]) -> LegFunction:
    A = _coefficients(A)
    return LegFunction(func=lambda x, leg: A[leg - 1] * x * x,
                       dx=lambda x, leg, side=1: 2.0 * A[leg - 1] * x,
                       d2x=lambda x, leg: 2.0 * A[leg - 1],
                       label=f"quadratic{tuple(A.tolist())}")


@dataclass(frozen=True)
class ThresholdFamily:
    """Payoff ``A_i x^power`` on leg ``i`` (``power`` 1: linear, 2: quadratic)."""

    kind: str
    A: tuple

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown payoff family {self.kind!r}")
        object.__setattr__(self, "A", tuple(_coefficients(self.A).tolist()))

    @property
    def power(self) -> int:
        return 1 if self.kind == "linear" else 2

    def payoff(self) -> LegFunction:
        return linear_payoff(self.A) if self.kind == "linear" else quadratic_payoff(self.A)


# ---------------------------------------------------------------------------
# Resolvent integrals
# ---------------------------------------------------------------------------

def _probe_integrability(model, f, leg):
    L = max(1.0, 1.0 / model.cr)
    vals = []
    for y in (10.0 * L, 20.0 * L, 40.0 * L):
        v = abs(float(f(y, leg))) * float(model.phi(y)) * float(model.chars.speed_density(y))
        vals.append(v)
    if not all(math.isfinite(v) for v in vals) or (vals[2] > vals[0] and vals[2] > 1e-300):
        raise IntegrationError(
            f"f * phi is not integrable on leg {leg} (tail probe {vals})", probe=vals
        )


def resolvent_apply(model: SpiderModel, f: LegFunction, at: SpiderPoint,
                    restrict: Optional[LegSet] = None, tol: float = 1e-10) -> float:
    """``G_r(1_restrict f)(at)``: the resolvent of ``f`` restricted to a set.

    Each leg integral is split at the evaluation point (where the kernel
    changes branch), at the kinks of ``f`` and at the interval ends.
    """
    x, i = at.x, at.leg
    parts = []
    for k in range(1, model.n + 1):
        ivs = ((0.0, math.inf),) if restrict is None else restrict.intervals_on(k)
        pk = model.prob(k)

        def integrand(y, k=k, pk=pk):
            if y <= 0:
                return 0.0
            w = green_density(model, x, i, y, k) * float(model.chars.speed_density(y))
            if w == 0.0:
                # far tail: skip f, whose derivatives may overflow there
                return 0.0
            return w * float(f(y, k)) * pk

        for a, b in ivs:
            if b == math.inf:
                _probe_integrability(model, f, k)
            pts = list(f.kinks_on(k))
            if k == i and x > 0:
                pts.append(x)
            parts.append(integrate_leg(integrand, a, b, tol=tol, points=pts))
    return math.fsum(parts)


def _atom_sum(model, atoms, at, restrict):
    total = 0.0
    for pt, mass in atoms:
        if restrict is None or restrict.contains(pt.x, pt.leg):
            total += mass * green_density(model, at.x, at.leg, pt.x, pt.leg)
    return total


def riesz_value(model: SpiderModel, payoff: LegFunction, region: LegSet,
                at: SpiderPoint) -> float:
    """``G_r(1_O f)(at) + g_r(at, 0) 1_O(0) delta0`` for the reward's decomposition.

    For a region solving the boundary equations this equals the value
    function; it is an independent (quadrature-based) check of
    :func:`assemble_value`.
    """
    dec = reward_decomposition(model, payoff)
    v = resolvent_apply(model, dec.density, at, restrict=region)
    v += _atom_sum(model, dec.atoms, at, region)
    if region.vertex_included:
        v += green_density(model, at.x, at.leg, 0.0, 1) * dec.delta0
    return v


def boundary_residual(model: SpiderModel, payoff: LegFunction, region: StoppingRegion,
                      at: SpiderPoint, decomposition=None) -> float:
    """``g - V~`` at ``at``, computed as the potential of the reward outside the region.

    Vanishes at every boundary point of an optimal region.
    """
    dec = decomposition or reward_decomposition(model, payoff)
    comp = region.complement()
    v = resolvent_apply(model, dec.density, at, restrict=comp)
    v += _atom_sum(model, dec.atoms, at, comp)
    if comp.vertex_included:
        v += green_density(model, at.x, at.leg, 0.0, 1) * dec.delta0
    return v


def vertex_in_continuation(model: SpiderModel, g: LegFunction) -> bool:
    """Sufficient test for the vertex to lie in the continuation region.

    True when ``sum_i p_i g^+(0, i) > 0``: such a ``g`` violates the gluing
    condition at the vertex, so it cannot coincide with an excessive value
    there.  False means "no conclusion".
    """
    return gluing_value(model, g) > 0.0


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass
class StoppingSolution:
    region: StoppingRegion
    value: LegFunction
    payoff: LegFunction
    thresholds: Optional[np.ndarray] = None
    label: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def verified(self) -> Optional[bool]:
        rep = self.diagnostics.get("verification")
        return None if rep is None else rep.certified


def _interp_two_sided(model, a, b, ga, gb):
    """Harmonic function on ``(a, b)`` with end values ``ga``, ``gb``."""
    pa, pb = float(model.phi(a)), float(model.phi(b))
    sa, sb = float(model.psi_killed(a)), float(model.psi_killed(b))
    D = sb * pa - sa * pb
    # V = alpha * psi + beta * phi
    alpha = (gb * pa - ga * pb) / D
    beta = (ga * sb - gb * sa) / D
    return alpha, beta


def assemble_value(model: SpiderModel, region: StoppingRegion, payoff: LegFunction) -> LegFunction:
    """Expected discounted payoff at the first entrance to ``region``.

    The value equals the payoff on the region.  On a continuation interval it
    is the r-harmonic function matching the payoff at the interval ends: a
    ``phi``-ratio on unbounded intervals and a ``psi_killed``/``phi``
    interpolation on bounded ones.  When the vertex is in the continuation
    region its value is fixed by the gluing condition of harmonic functions.
    """
    if not isinstance(region, StoppingRegion):
        raise TypeError("region must be a StoppingRegion")
    if region.n != model.n:
        raise ValueError(f"region has {region.n} legs, model has {model.n}")
    if region.is_empty():
        raise ValueError("the stopping region is empty")
    cr = model.cr
    comp = region.complement()

    # value at the vertex
    if region.vertex_included:
        v0 = float(payoff(0.0, 1))
    else:
        num, den = 0.0, 0.0
        for k in range(1, model.n + 1):
            gaps = comp.intervals_on(k)
            pk = model.prob(k)
            b = gaps[0][1] if gaps and gaps[0][0] == 0.0 else 0.0
            if math.isinf(b):
                den += pk * cr
            else:
                s = float(model.psi_killed(b))
                num += pk * float(payoff(b, k)) / s
                den += pk * (cr + float(model.phi(b)) / s)
        v0 = num / den

    # per-leg segments (lo, hi, alpha, beta); alpha=None marks a stopping piece
    segments = []
    for k in range(1, model.n + 1):
        segs = [(a, b, None, None) for a, b in region.intervals_on(k)]
        for a, b in comp.intervals_on(k):
            ga = v0 if a == 0.0 else float(payoff(a, k))
            if math.isinf(b):
                alpha, beta = 0.0, ga / float(model.phi(a))
            else:
                alpha, beta = _interp_two_sided(model, a, b, ga, float(payoff(b, k)))
            segs.append((a, b, alpha, beta))
        segs.sort(key=lambda s: (s[0], s[1]))
        segments.append(segs)

    def locate(x, leg, side):
        segs = segments[leg - 1]
        for lo, hi, alpha, beta in segs:
            if side < 0 and lo < x <= hi:
                return alpha, beta
            if side >= 0 and lo <= x < hi:
                return alpha, beta
        return segs[-1][2], segs[-1][3]

    def func(x, leg):
        if x == 0:
            return v0
        alpha, beta = locate(x, leg, 1)
        if alpha is None:
            return float(payoff(x, leg))
        return alpha * float(model.psi_killed(x)) + beta * float(model.phi(x))

    def dx(x, leg, side=1):
        alpha, beta = locate(x, leg, side)
        if alpha is None:
            if payoff.dx is not None:
                return float(payoff.dx(x, leg, side))
            s = side if x > 0 else 1
            return float(one_sided_derivative(lambda t: payoff(t, leg), x, s))
        ds = alpha * float(model.dpsi_killed(x, side)) + beta * float(model.dphi(x, side))
        return ds * float(model.dscale(x))

    kinks = {(float(p.x), p.leg) for p, _ in region.boundary_points()}
    kinks.update((float(x), k) for x, k in payoff.kinks)
    return LegFunction(func=func, dx=dx, kinks=tuple(sorted(kinks, key=lambda t: (t[1], t[0]))),
                       label=f"V[{payoff.label}]")


# ---------------------------------------------------------------------------
# The three-leg example with a connected region
# ---------------------------------------------------------------------------

def _example71_model(model_or_r) -> SpiderModel:
    if isinstance(model_or_r, SpiderModel):
        model = model_or_r
    else:
        r = float(model_or_r)
        if not r > 0:
            raise ValueError(f"discount rate must be positive, got {r}")
        model = SpiderModel.brownian(3, r=r)
    if not model.chars.is_brownian or model.n != 3 or any(
            abs(p - 1.0 / 3.0) > 1e-12 for p in model.p):
        raise ValueError("this payoff is solved for the Brownian spider with 3 legs and p = 1/3")
    return model


def _F2(theta, x):
    return math.exp(-theta * x) * (-0.5 + theta * (1.0 - 0.5 * x)) / (3.0 * theta)


def _F3(theta, x):
    return math.exp(-theta * x) * (-2.0 + theta * (1.0 - 2.0 * x)) / (3.0 * theta)


def _F1bar(theta, x):
    # (1 + x) psi~'(x, 1) - psi~(x, 1) with psi~ = 3 sinh(theta x)/theta + exp(-theta x)/theta
    e, em = math.exp(theta * x), math.exp(-theta * x)
    return (1.0 + x) * 0.5 * (3.0 * e + em) - 0.5 * (3.0 * e - em) / theta


def example71_case(r: float) -> str:
    """``'a'`` for ``r > 2``, ``'b'`` for ``1/8 < r <= 2``, ``'c'`` for ``r <= 1/8``.

    Decided by the signs of the tail functions at 0 rather than by comparing
    ``r`` with the case boundaries, so floating-point ``r`` near a boundary is
    classified consistently with the root finding.
    """
    if not r > 0:
        raise ValueError(f"discount rate must be positive, got {r}")
    theta = math.sqrt(2.0 * r)
    if _F3(theta, 0.0) > 0:
        return "a"
    if _F2(theta, 0.0) > 0:
        return "b"
    return "c"


def solve_example71(model_or_r, verify: bool = True, grid=None) -> StoppingSolution:
    """Stopping region and value for the three-leg payoff ``1+x, (1-x/2)^+, (1-2x)^+``.

    Parameters
    ----------
    model_or_r : SpiderModel or float
        Brownian spider with three legs and uniform ``p``, or just ``r``.
    verify : bool
        Run :func:`verify_solution` and store the report in the diagnostics.

    Returns
    -------
    StoppingSolution
        ``label`` holds the case letter; ``diagnostics["thresholds"]`` maps
        ``"x2"``, ``"x3"`` or ``"z1"`` to the boundary points.
    """
    model = _example71_model(model_or_r)
    theta = model.theta
    case = example71_case(model.r)
    g = example71_payoff()
    found = {}
    if case in ("a", "b"):
        found["x2"] = find_root_bracketed(lambda x: _F2(theta, x), 0.0, 2.0).root
        leg3 = ()
        if case == "a":
            found["x3"] = find_root_bracketed(lambda x: _F3(theta, x), 0.0, 0.5).root
            leg3 = ((0.0, found["x3"]),)
        region = StoppingRegion(
            (((0.0, math.inf),), ((0.0, found["x2"]),), leg3), True
        )
    else:
        hi = 1.0
        while _F1bar(theta, hi) < 0:
            hi *= 2.0
            if hi > 1e6:
                raise NumericalError("no sign change for the leg-1 boundary", hi=hi)
        z = find_root_bracketed(lambda x: _F1bar(theta, x), 0.0, hi).root
        found["z1"] = z
        region = StoppingRegion((((z, math.inf),), (), ()), z == 0.0)
    value = assemble_value(model, region, g)
    sol = StoppingSolution(region=region, value=value, payoff=g, label=case,
                           diagnostics={"thresholds": found, "case": case})
    if case == "c":
        z = found["z1"]
        sol.diagnostics["K"] = float(g(z, 1)) / (theta * float(psi_tilde(model, z, 1)))
    _finish(model, sol, verify, grid)
    return sol


solve_spider_example71 = solve_example71


# ---------------------------------------------------------------------------
# Threshold families
# ---------------------------------------------------------------------------

def _aux(kind, w):
    """Closed-form sinh- and exp-moments of the family densities in ``w = theta z``."""
    if kind == "linear":
        grow = w * math.cosh(w) - math.sinh(w)
        decay = math.exp(-w) * (1.0 + w)      # 1 - int_0^w u e^{-u} du
        return grow, decay
    grow = w * w * math.cosh(w) - 2.0 * w * math.sinh(w)
    decay = -math.exp(-w) * w * (w + 2.0)
    return grow, decay


def threshold_equations(model: SpiderModel, family: ThresholdFamily):
    """Normalized boundary equations ``E(z) = 0`` for a threshold family.

    For the Brownian spider, in ``w = theta z``:

    * linear:    ``A_i (w_i cosh w_i - sinh w_i) - sum_k p_k A_k e^{-w_k}(1 + w_k)``
    * quadratic: ``A_i (w_i^2 cosh w_i - 2 w_i sinh w_i) - sum_k p_k A_k e^{-w_k} w_k (w_k + 2)``

    The returned callable takes the thresholds ``z`` (not ``w``).
    """
    A = np.asarray(family.A)
    if A.size != model.n:
        raise ValueError(f"need {model.n} coefficients, got {A.size}")
    if not model.chars.is_brownian:
        raise ValueError("closed-form equations exist only for the Brownian spider")
    p = np.asarray(model.p)
    theta = model.theta
    kind = family.kind

    def E(z):
        w = theta * np.asarray(z, dtype=float)
        grow = np.empty(w.size)
        decay = np.empty(w.size)
        for k, wk in enumerate(w):
            grow[k], decay[k] = _aux(kind, wk)
        if kind == "linear":
            return A * grow - np.dot(p * A, decay)
        return A * grow + np.dot(p * A, decay)

    return E


def _quadrature_equations(model, family):
    """Same equations as :func:`threshold_equations`, by quadrature of the kernel."""
    payoff = family.payoff()
    dec = reward_decomposition(model, payoff)
    cr = model.cr

    def E(z):
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            return np.full(z.size, np.nan)
        region = StoppingRegion.from_thresholds(z)
        out = np.empty(z.size)
        for i in range(z.size):
            at = SpiderPoint(z[i], i + 1)
            res = boundary_residual(model, payoff, region, at, dec)
            out[i] = res * cr / float(model.phi(z[i]))
        return out

    return E


_SCALAR_W = {}


def _scalar_w(kind):
    """Root of ``w tanh w = power`` (the symmetric threshold in ``w`` units)."""
    if kind not in _SCALAR_W:
        power = 1.0 if kind == "linear" else 2.0
        _SCALAR_W[kind] = find_root_bracketed(lambda w: w * math.tanh(w) - power, 0.1, 10.0,
                                              tol=1e-14).root
    return _SCALAR_W[kind]


def scalar_threshold(model: SpiderModel, kind: str) -> float:
    """Common threshold when all coefficients are equal.

    It does not depend on the coefficients or on ``p``; for the Brownian spider
    it solves ``w tanh w = 1`` (linear) or ``= 2`` (quadratic) with
    ``w = theta z``, which is also the threshold of the reflected Brownian
    motion with payoff ``x`` or ``x^2``.
    """
    if model.chars.is_brownian:
        return _scalar_w(kind) / model.theta
    fam = ThresholdFamily(kind, (1.0,) * model.n)
    E = _quadrature_equations(model, fam)

    def sym(s):
        return E(np.full(model.n, s))[0]

    lo = 0.05 / model.cr
    f_lo = sym(lo)
    hi = lo
    while True:
        hi *= 1.5
        f_hi = sym(hi)
        if f_lo * f_hi <= 0:
            break
        if hi > 200.0 / model.cr:
            raise NumericalError("no sign change for the symmetric threshold", hi=hi)
        lo, f_lo = hi, f_hi
    return find_root_bracketed(sym, lo, hi).root


def threshold_bounds(model: SpiderModel, family: ThresholdFamily):
    """Per-leg bounds on the thresholds from comparison with one-leg problems.

    The value lies between ``A_min U`` and ``A_max U``, where ``U`` is the
    value of the symmetric problem (coefficients all 1).  Hence leg ``i``
    continues wherever ``A_min U(x) > A_i x^power``, and a leg with the largest
    coefficient stops wherever ``U(x) = x^power``.

    Returns
    -------
    lo, hi : ndarray
        ``lo_i <= z_i <= hi_i``; ``hi_i`` is ``inf`` where no bound follows.
    """
    if not model.chars.is_brownian:
        raise ValueError("bounds are implemented for the Brownian spider")
    A = np.asarray(family.A)
    k = family.power
    theta = model.theta
    zs = scalar_threshold(model, family.kind)

    def U(x):
        if x >= zs:
            return x ** k
        return zs ** k * math.cosh(theta * x) / math.cosh(theta * zs)

    lo = np.empty(A.size)
    hi = np.full(A.size, math.inf)
    a_min, a_max = A.min(), A.max()
    for i, a in enumerate(A):
        if a == a_min:
            lo[i] = zs
        else:
            lo[i] = find_root_bracketed(lambda x: a * x ** k - a_min * U(x), 1e-12, zs).root
        if a == a_max:
            hi[i] = zs
    return lo, hi


def solve_threshold_system(model: SpiderModel, family, A: Optional[Sequence[float]] = None,
                           method: str = "auto", verify: bool = True, grid=None,
                           tol: float = 1e-12) -> StoppingSolution:
    """Per-leg thresholds ``z_i`` of the stopping region ``{x >= z_i}``.

    Parameters
    ----------
    model : SpiderModel
    family : {"linear", "quadratic"} or ThresholdFamily
    A : sequence of float, optional
        Positive coefficients; required when ``family`` is a string.
    method : {"auto", "closed-form", "quadrature"}
        ``auto`` uses the closed-form equations for the Brownian spider and
        quadrature of the Green kernel otherwise.
    verify : bool
        Run :func:`verify_solution` and attach the report.

    Notes
    -----
    The Newton iteration starts from the symmetric threshold, which always
    lies between the smallest and the largest solution component.  Reference
    values exist for the Brownian spider at ``r = 1/2`` only;
    ``diagnostics["reference_regime"]`` records whether the solve is in that
    regime.
    """
    if not isinstance(family, ThresholdFamily):
        if A is None:
            raise ValueError("coefficients A are required")
        family = ThresholdFamily(str(family), tuple(A))
    if len(family.A) != model.n:
        raise ValueError(f"need {model.n} coefficients, got {len(family.A)}")
    if method == "auto":
        method = "closed-form" if model.chars.is_brownian else "quadrature"
    # thresholds are invariant under scaling of A; solve with max(A) = 1 so
    # that the absolute tolerance is meaningful
    scaled = ThresholdFamily(family.kind, tuple(np.asarray(family.A) / max(family.A)))
    if method == "closed-form":
        E = threshold_equations(model, scaled)
    elif method == "quadrature":
        E = _quadrature_equations(model, scaled)
        tol = max(tol, 1e-9)
    else:
        raise ValueError(f"unknown method {method!r}")
    z0 = np.full(model.n, scalar_threshold(model, family.kind))
    try:
        z = solve_system(E, z0, tol=tol)
        steps = 0
    except ConvergenceError:
        z, steps = _continuation(model, scaled, method, z0, tol)
    payoff = family.payoff()
    region = StoppingRegion.from_thresholds(z)
    value = assemble_value(model, region, payoff)
    sol = StoppingSolution(
        region=region, value=value, payoff=payoff, thresholds=z,
        label=f"{family.kind}{family.A}",
        diagnostics={
            "method": method,
            "family": family,
            "equation_residuals": np.asarray(E(z)),
            "initial": z0,
            "continuation_steps": steps,
            "reference_regime": bool(model.chars.is_brownian and model.r == 0.5),
        },
    )
    if family.kind == "quadratic":
        # the reward density r x^2 - 1 must be >= 0 on the region
        sol.diagnostics["sign_margin"] = float(np.min(
            [float(reward_decomposition(model, payoff).density(zi, i + 1))
             for i, zi in enumerate(z)]))
    _finish(model, sol, verify, grid)
    return sol


def _continuation(model, family, method, z0, tol, max_steps=640):
    """Follow the solution from equal coefficients to ``family.A`` along ``A^t``.

    Used when Newton's method from the symmetric threshold fails, which
    happens for widely spread coefficients.  The step count doubles until
    every intermediate solve converges.
    """
    logA = np.log(np.asarray(family.A))
    steps = 10
    while steps <= max_steps:
        z = z0.copy()
        try:
            for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
                fam_t = ThresholdFamily(family.kind, tuple(np.exp(t * logA)))
                E = threshold_equations(model, fam_t) if method == "closed-form" \
                    else _quadrature_equations(model, fam_t)
                z = solve_system(E, z, tol=tol)
            return z, steps
        except ConvergenceError:
            steps *= 2
    raise ConvergenceError("continuation in the coefficients failed", A=family.A,
                           steps=max_steps)


def _finish(model, sol, verify, grid):
    sol.diagnostics["value_gluing"] = gluing_value(model, sol.value)
    sol.diagnostics["payoff_gluing"] = gluing_value(model, sol.payoff)
    if verify:
        sol.diagnostics["verification"] = verify_solution(model, sol.payoff, sol, grid)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    checks: dict
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def certified(self) -> bool:
        """Optimality follows from the checks.

        Either all six checks pass, or the value is an excessive majorant of
        the payoff; since every value built by :func:`assemble_value` is
        attained by the first entrance to the region, the latter alone
        certifies optimality.
        """
        return self.passed or (self.checks["majorant"] and self.checks["excessive"])

    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v]

    def rows(self):
        return [(name, "pass" if ok else "FAIL", self.details.get(name, ""))
                for name, ok in self.checks.items()]


def _default_grid(model, region):
    xs = [p.x for p, _ in region.boundary_points()]
    xmax = max([3.0, 3.0 / model.cr] + [2.0 * x for x in xs])
    return np.linspace(0.0, xmax, 151)


def smooth_fit_check(model: SpiderModel, sol: StoppingSolution, payoff: LegFunction,
                     boundary: SpiderPoint, side: Optional[int] = None,
                     step: float = 1e-6) -> float:
    """Mismatch of scale derivatives of value and payoff at a boundary point.

    The value is differentiated by one-sided finite differences on the
    continuation side; the payoff on the stopping side.  The mismatch is
    absolute for payoff slopes up to 1 and relative beyond.  ``side`` is ``-1``
    when the continuation region lies to the left and is inferred from the
    region when omitted.
    """
    if boundary.is_vertex:
        raise ValueError("smooth fit is not defined at the vertex")
    x, leg = boundary.x, boundary.leg
    if side is None:
        sides = [s for p, s in sol.region.boundary_points() if p == boundary]
        if not sides:
            raise ValueError(f"{boundary} is not a boundary point of the region")
        side = sides[0]
    V = sol.value
    h = step
    gap = [abs(k - x) for k in payoff.kinks_on(leg) if k != x]
    if gap:
        h = min(h, min(gap) / 4.0 / (abs(x) + 1.0))
    dv = float(one_sided_derivative(lambda t: V(t, leg), x, side, h))
    gfun = LegFunction(func=payoff.func, dx=payoff.dx, kinks=payoff.kinks)
    dg = scale_derivative(model, gfun, x, leg, -side, step) * float(model.dscale(x))
    # relative to the payoff slope once that exceeds 1, so large coefficients
    # are judged on the same footing as unit ones
    return abs(dv - dg) / float(model.dscale(x)) / max(1.0, abs(dg) / float(model.dscale(x)))


def verify_solution(model: SpiderModel, payoff: LegFunction, sol: StoppingSolution,
                    grid: Optional[Iterable[float]] = None, tol: float = 1e-4) -> VerificationReport:
    """Sufficient conditions for optimality, checked numerically.

    1. majorant: ``V >= g - tol`` on the grid (all legs);
    2. excessivity of ``V`` (gluing value and tails of the representing measure);
    3. boundary equations: ``g - V~`` vanishes at each boundary point
       (including the vertex when it is one), with ``V~`` the potential of the
       reward restricted to the region;
    4. the reward density (and kink atoms) are non-negative on the region;
    5. a negative vertex mass of the reward keeps the vertex out of the region;
    6. smooth fit at every boundary point off the vertex.

    Checks 1-6 together are sufficient for optimality but 3 is not
    necessary: when a leg is left entirely in the continuation region the
    potential ``V~`` may differ from the value although the region is optimal.
    :attr:`VerificationReport.certified` accounts for this.
    """
    region = sol.region
    grid = np.asarray(_default_grid(model, region) if grid is None else list(grid), dtype=float)
    V = sol.value
    dec = reward_decomposition(model, payoff)
    checks, details = {}, {}

    gaps = [float(V(x, leg)) - float(payoff(x, leg))
            for leg in range(1, model.n + 1) for x in grid]
    min_gap = min(gaps)
    checks["majorant"] = min_gap >= -tol
    details["majorant"] = f"min(V - g) = {min_gap:.3g}"

    pos = grid[grid > 0]
    rep = is_excessive(model, V, pos, sign_tol=tol, mono_tol=tol)
    checks["excessive"] = rep.verdict
    details["excessive"] = "; ".join(rep.failures) or f"gluing {rep.gluing:.3g}"

    resid = {}
    for pt, _side in region.boundary_points():
        resid[(pt.x, pt.leg)] = boundary_residual(model, payoff, region, pt, dec)
    if region.vertex_included and not all(
            ivs and ivs[0][0] == 0.0 for ivs in region.intervals):
        # some leg leaves the region right at the vertex: 0 is a boundary point
        resid[(0.0, 0)] = boundary_residual(model, payoff, region, VERTEX, dec)
    worst = max((abs(v) for v in resid.values()), default=0.0)
    checks["boundary_equation"] = worst < tol
    details["boundary_equation"] = f"max |residual| = {worst:.3g}"

    negative = []
    for leg in range(1, model.n + 1):
        for x in pos:
            if region.contains(x, leg):
                d = dec.density(x, leg)
                if math.isfinite(d) and d < -tol:
                    negative.append((x, leg, d))
    for pt, mass in dec.atoms:
        if region.contains(pt.x, pt.leg) and mass < -tol:
            negative.append((pt.x, pt.leg, mass))
    checks["sign"] = not negative
    details["sign"] = f"{len(negative)} negative samples" if negative else "f >= 0 on region"

    checks["vertex"] = not (dec.delta0 < 0 and region.vertex_included)
    details["vertex"] = f"delta0 = {dec.delta0:.6g}, vertex in region: {region.vertex_included}"

    fits = {}
    for pt, side in region.boundary_points():
        fits[(pt.x, pt.leg)] = smooth_fit_check(model, sol, payoff, pt, side)
    worst_fit = max(fits.values(), default=0.0)
    checks["smooth_fit"] = worst_fit < tol
    details["smooth_fit"] = f"max residual = {worst_fit:.3g}"

    sol.diagnostics.update(majorant_gap=min_gap, boundary_residuals=resid,
                           smooth_fit=fits)
    return VerificationReport(checks, details)


def uniqueness_sweep(model: SpiderModel, sol: StoppingSolution, alphas=None,
                     method: str = "auto") -> dict:
    """Sign changes of the boundary-equation residual along per-leg sweeps.

    For each leg ``i`` the threshold ``alpha_i`` is swept with the other
    thresholds held at the solution; a single sign change per leg supports
    uniqueness of the solution within the class of per-leg upper rays.  This
    is a numerical surrogate, not a proof.

    Returns
    -------
    dict
        ``leg -> number of sign changes``.
    """
    z = sol.thresholds
    if z is None:
        raise ValueError("the sweep applies to threshold solutions")
    family = sol.diagnostics["family"]
    if method == "auto":
        method = "closed-form" if model.chars.is_brownian else "quadrature"
    E = threshold_equations(model, family) if method == "closed-form" \
        else _quadrature_equations(model, family)
    if alphas is None:
        alphas = np.linspace(0.05, 3.0, 60) * float(np.max(z))
    out = {}
    for i in range(model.n):
        vals = []
        for a in alphas:
            zz = np.array(z, dtype=float)
            zz[i] = a
            vals.append(E(zz)[i])
        s = np.sign(vals)
        s = s[s != 0]
        out[i + 1] = int(np.sum(s[1:] != s[:-1]))
    return out
