"""
Diffusion characteristics, spider models and points on the star graph.

A diffusion spider runs a fixed one-dimensional diffusion on each of its
``n`` half-line legs and picks leg ``i`` with probability ``p[i-1]`` when it
leaves the vertex.  Everything the rest of the package needs about the leg
diffusion is packed in :class:`DiffusionCharacteristics`:

* ``phi(x, r)``         decreasing r-harmonic function, ``phi(0) = 1``
* ``psi_killed(x, r)``  increasing r-harmonic function of the process killed
                        at 0, ``psi_killed(0) = 0`` and scale derivative 1 at 0+
* ``scale(x)``          scale function with ``scale(0) = 0``
* ``speed_density(x)``  density of the speed measure w.r.t. length
* ``c_r(r)``            ``-d phi / dS (0+)``

Legs are numbered ``1..n`` everywhere in the public API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import central_derivative, one_sided_derivative

__all__ = [
    "DiffusionCharacteristics",
    "SpiderModel",
    "SpiderPoint",
    "LegFunction",
    "CharacteristicsReport",
    "VERTEX",
    "brownian_characteristics",
    "drifted_brownian_characteristics",
    "validate_characteristics",
    "register_characteristics",
    "get_characteristics",
    "available_characteristics",
]


@dataclass(frozen=True)
class DiffusionCharacteristics:
    """Evaluators describing one recurrent diffusion on ``[0, inf)``.

    The optional fields carry closed forms when they are known.  ``dphi`` and
    ``dpsi_killed`` are derivatives with respect to the *scale*; ``dscale`` and
    ``d2scale`` are ordinary derivatives of ``scale``; ``log_phi`` and
    ``log_psi_killed`` are used by the kernels when products of the
    fundamental solutions would over- or underflow.
    """

    name: str
    phi: Callable
    psi_killed: Callable
    scale: Callable
    speed_density: Callable
    c_r: Callable
    dphi: Optional[Callable] = None
    dpsi_killed: Optional[Callable] = None
    dscale: Optional[Callable] = None
    d2scale: Optional[Callable] = None
    log_phi: Optional[Callable] = None
    log_psi_killed: Optional[Callable] = None
    params: dict = field(default_factory=dict, compare=False)

    @property
    def is_brownian(self) -> bool:
        return self.name == "brownian"


def brownian_characteristics() -> DiffusionCharacteristics:
    """Reflecting Brownian motion: ``S(x) = x``, ``m(dx) = 2 dx``.

    With ``theta = sqrt(2 r)``: ``phi = exp(-theta x)``,
    ``psi_killed = sinh(theta x) / theta`` and ``c_r = theta``.
    """

    def theta(r):
        return math.sqrt(2.0 * r)

    def log_psi(x, r):
        t = theta(r)
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = t * x + np.log1p(-np.exp(-2.0 * t * x)) - math.log(2.0 * t)
        return out if out.ndim else float(out)

    return DiffusionCharacteristics(
        name="brownian",
        phi=lambda x, r: np.exp(-theta(r) * x),
        psi_killed=lambda x, r: np.sinh(theta(r) * x) / theta(r),
        scale=lambda x: x,
        speed_density=lambda x: 2.0 + 0.0 * np.asarray(x, dtype=float),
        c_r=theta,
        dphi=lambda x, r: -theta(r) * np.exp(-theta(r) * x),
        dpsi_killed=lambda x, r: np.cosh(theta(r) * x),
        dscale=lambda x: 1.0 + 0.0 * np.asarray(x, dtype=float),
        d2scale=lambda x: 0.0 * np.asarray(x, dtype=float),
        log_phi=lambda x, r: -theta(r) * np.asarray(x, dtype=float),
        log_psi_killed=log_psi,
    )


def drifted_brownian_characteristics(mu: float) -> DiffusionCharacteristics:
    """Brownian motion with drift ``-mu`` towards the vertex, reflected at 0.

    Generator ``u''/2 - mu u'``.  Positive recurrent for ``mu > 0`` and
    reduces to :func:`brownian_characteristics` at ``mu = 0`` (up to name).
    """
    if mu < 0:
        raise ValueError("mu must be non-negative for a recurrent diffusion")

    def roots(r):
        s = math.sqrt(mu * mu + 2.0 * r)
        return mu + s, mu - s

    def scale(x):
        x = np.asarray(x, dtype=float)
        out = x if mu == 0 else np.expm1(2.0 * mu * x) / (2.0 * mu)
        return out if out.ndim else float(out)

    def dscale(x):
        return np.exp(2.0 * mu * np.asarray(x, dtype=float))

    def phi(x, r):
        return np.exp(roots(r)[1] * x)

    def psi(x, r):
        up, lo = roots(r)
        return (np.exp(up * x) - np.exp(lo * x)) / (up - lo)

    return DiffusionCharacteristics(
        name="drifted_brownian",
        phi=phi,
        psi_killed=psi,
        scale=scale,
        speed_density=lambda x: 2.0 * np.exp(-2.0 * mu * np.asarray(x, dtype=float)),
        c_r=lambda r: -roots(r)[1],
        dphi=lambda x, r: roots(r)[1] * phi(x, r) / dscale(x),
        dpsi_killed=lambda x, r: (
            (roots(r)[0] * np.exp(roots(r)[0] * x) - roots(r)[1] * np.exp(roots(r)[1] * x))
            / (roots(r)[0] - roots(r)[1])
            / dscale(x)
        ),
        dscale=dscale,
        d2scale=lambda x: 2.0 * mu * dscale(x),
        params={"mu": mu},
    )


_REGISTRY: dict[str, Callable[..., DiffusionCharacteristics]] = {
    "brownian": brownian_characteristics,
    "drifted_brownian": drifted_brownian_characteristics,
}


def register_characteristics(name: str, factory: Callable[..., DiffusionCharacteristics]) -> None:
    """Make ``factory`` selectable by ``name`` (CLI ``--chars`` and config files)."""
    _REGISTRY[name] = factory


def get_characteristics(name: str, **params) -> DiffusionCharacteristics:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown characteristics {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def available_characteristics() -> list[str]:
    return sorted(_REGISTRY)


def _parse_prob(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class SpiderModel:
    """A homogeneous diffusion spider ``(X, n, p)`` with discount rate ``r``."""

    n: int
    p: tuple
    r: float
    chars: DiffusionCharacteristics = field(default_factory=brownian_characteristics)

    def __post_init__(self):
        p = tuple(_parse_prob(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if self.n < 1 or len(p) != self.n:
            raise ValueError(f"expected {self.n} leg probabilities, got {len(p)}")
        if any(not (v > 0) for v in p):
            raise ValueError("leg probabilities must be positive")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError(f"leg probabilities sum to {math.fsum(p)!r}, not 1")
        if not (self.r > 0):
            raise ValueError("discount rate r must be positive")

    @classmethod
    def brownian(cls, n: int, p: Sequence | None = None, r: float = 0.5) -> "SpiderModel":
        if p is None:
            p = [Fraction(1, n)] * n
        return cls(n=n, p=tuple(p), r=r, chars=brownian_characteristics())

    def prob(self, leg: int) -> float:
        self.check_leg(leg)
        return self.p[leg - 1]

    def check_leg(self, leg: int) -> None:
        if not (1 <= leg <= self.n):
            raise ValueError(f"leg {leg} outside 1..{self.n}")

    @cached_property
    def cr(self) -> float:
        return float(self.chars.c_r(self.r))

    @cached_property
    def theta(self) -> float:
        """``sqrt(2 r)``; only meaningful for the Brownian specialization."""
        return math.sqrt(2.0 * self.r)

    def phi(self, x):
        return self.chars.phi(x, self.r)

    def psi_killed(self, x):
        return self.chars.psi_killed(x, self.r)

    def dscale(self, x):
        """Ordinary derivative of the scale function."""
        if self.chars.dscale is not None:
            return self.chars.dscale(x)
        return central_derivative(self.chars.scale, x)

    def d2scale(self, x):
        if self.chars.d2scale is not None:
            return self.chars.d2scale(x)
        return central_derivative(self.dscale, x, step=1e-5)

    def dphi(self, x, side: int = 1):
        """Scale derivative of ``phi``; ``side`` only matters for finite differences."""
        if self.chars.dphi is not None:
            return self.chars.dphi(x, self.r)
        return _fd_scale_derivative(self, self.phi, x, side)

    def dpsi_killed(self, x, side: int = 1):
        if self.chars.dpsi_killed is not None:
            return self.chars.dpsi_killed(x, self.r)
        return _fd_scale_derivative(self, self.psi_killed, x, side)


def _fd_scale_derivative(model: SpiderModel, f, x, side):
    if x <= 0:
        side = 1
    elif side == 0:
        return central_derivative(f, x) / model.dscale(x)
    return one_sided_derivative(f, x, side) / model.dscale(x)


@total_ordering
@dataclass(frozen=True, eq=False)
class SpiderPoint:
    """The point at distance ``x`` from the vertex on leg ``leg``.

    Every ``SpiderPoint(0, i)`` is the vertex and they all compare equal.
    ``x = inf`` denotes the Martin-boundary point at infinity of the leg.
    """

    x: float
    leg: int = 1

    def __post_init__(self):
        if not (self.x >= 0):
            raise ValueError(f"distance must be non-negative, got {self.x}")
        if self.leg < 1:
            raise ValueError(f"legs are numbered from 1, got {self.leg}")

    @property
    def is_vertex(self) -> bool:
        return self.x == 0

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.x)

    def _key(self):
        return (0, 0.0) if self.is_vertex else (self.leg, float(self.x))

    def __eq__(self, other):
        if not isinstance(other, SpiderPoint):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other):
        if not isinstance(other, SpiderPoint):
            return NotImplemented
        return self._key() < other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "SpiderPoint(vertex)" if self.is_vertex else f"SpiderPoint({self.x!r}, leg={self.leg})"


VERTEX = SpiderPoint(0.0, 1)


@dataclass(frozen=True)
class LegFunction:
    """A function ``f(x, leg)`` on the star graph.

    ``dx(x, leg, side)`` and ``d2x(x, leg)`` are optional closed-form ordinary
    derivatives in ``x`` (``side`` is ``-1`` for the left and ``+1`` for the
    right derivative).  ``kinks`` lists ``(x, leg)`` locations where the first
    derivative jumps; finite-difference stencils never straddle them.
    """

    func: Callable[[float, int], float]
    dx: Optional[Callable[[float, int, int], float]] = None
    d2x: Optional[Callable[[float, int], float]] = None
    kinks: tuple = ()
    label: str = ""

    def __call__(self, x, leg):
        return self.func(x, leg)

    def kinks_on(self, leg: int) -> list[float]:
        return sorted(float(x) for x, k in self.kinks if k == leg)

    def vertex_mismatch(self, n: int) -> float:
        """Largest spread of ``f(0, i)`` over the legs (0 for a well-defined function)."""
        vals = [float(self.func(0.0, i)) for i in range(1, n + 1)]
        return max(vals) - min(vals)


@dataclass
class CharacteristicsReport:
    wronskian_residual: float
    phi0_error: float
    psi0_error: float
    psi_slope0_error: float
    cr_error: float
    monotonicity_violations: list = field(default_factory=list)
    evaluation_errors: list = field(default_factory=list)
    tol: float = 1e-8
    cr_tol: float = 1e-4

    @property
    def failures(self) -> list[str]:
        out = []
        if not self.wronskian_residual <= self.tol:
            out.append(f"wronskian residual {self.wronskian_residual:.3g}")
        if not self.phi0_error <= self.tol:
            out.append(f"|phi(0)-1| = {self.phi0_error:.3g}")
        if not self.psi0_error <= self.tol:
            out.append(f"|psi_killed(0)| = {self.psi0_error:.3g}")
        if not self.psi_slope0_error <= self.cr_tol:
            out.append(f"|dpsi/dS(0+)-1| = {self.psi_slope0_error:.3g}")
        if not self.cr_error <= self.cr_tol:
            out.append(f"c_r mismatch {self.cr_error:.3g}")
        out += [f"monotonicity: {m}" for m in self.monotonicity_violations]
        out += [f"evaluation: {e}" for e in self.evaluation_errors]
        return out

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_characteristics(
    chars: DiffusionCharacteristics,
    r: float,
    grid: Sequence[float],
    step: float = 1e-6,
    tol: float = 1e-8,
) -> CharacteristicsReport:
    """Check normalizations, the Wronskian identity and monotonicity numerically.

    Derivatives are central finite differences (step relative to ``|x| + 1``),
    never the closed forms, so the report is an independent check of them.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be non-empty, positive and strictly increasing")

    phi = lambda x: chars.phi(x, r)
    psi = lambda x: chars.psi_killed(x, r)
    errors = []
    wr = 0.0
    vals_phi, vals_psi = [], []
    for x in grid:
        try:
            ds = central_derivative(chars.scale, x, step)
            dphi = central_derivative(phi, x, step) / ds
            dpsi = central_derivative(psi, x, step) / ds
            fx, gx = float(phi(x)), float(psi(x))
            wr = max(wr, abs(dpsi * fx - dphi * gx - 1.0))
            vals_phi.append(fx)
            vals_psi.append(gx)
        except (ArithmeticError, ValueError) as exc:
            errors.append(f"x={x}: {exc}")
            vals_phi.append(math.nan)
            vals_psi.append(math.nan)
        else:
            if not (math.isfinite(fx) and math.isfinite(gx) and math.isfinite(dpsi)):
                errors.append(f"x={x}: non-finite value")
    mono = []
    for a, b, fa, fb, ga, gb in zip(grid, grid[1:], vals_phi, vals_phi[1:], vals_psi, vals_psi[1:]):
        if not fb < fa:
            mono.append(f"phi not decreasing on [{a}, {b}]")
        if not gb > ga:
            mono.append(f"psi_killed not increasing on [{a}, {b}]")

    h = 1e-5
    s_h = float(chars.scale(h))
    slope_phi = -(float(phi(h)) - float(phi(0.0))) / s_h
    slope_psi = (float(psi(h)) - float(psi(0.0))) / s_h
    cr = float(chars.c_r(r))
    return CharacteristicsReport(
        wronskian_residual=wr,
        phi0_error=abs(float(phi(0.0)) - 1.0),
        psi0_error=abs(float(psi(0.0))),
        psi_slope0_error=abs(slope_psi - 1.0),
        cr_error=abs(cr - slope_phi) / max(1.0, abs(cr)) if cr > 0 else math.inf,
        monotonicity_violations=mono,
        evaluation_errors=errors,
        tol=tol,
    )
