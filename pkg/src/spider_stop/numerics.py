"""
Small numerical kernels shared by the rest of the package.

Root bracketing, a damped Newton solver for the 2-10 dimensional threshold
systems, leg quadrature (QUADPACK through scipy) and finite differences.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "NumericalError",
    "RootNotBracketed",
    "ConvergenceError",
    "IntegrationError",
    "RootResult",
    "find_root_bracketed",
    "solve_system",
    "integrate_leg",
    "central_derivative",
    "one_sided_derivative",
    "second_derivative",
    "ROOT_TOL",
    "SYSTEM_TOL",
    "QUAD_TOL",
]

ROOT_TOL = 1e-10
SYSTEM_TOL = 1e-10
QUAD_TOL = 1e-9


class NumericalError(RuntimeError):
    """Base class for numerical failures; carries whatever partial state exists."""

    def __init__(self, message, **state):
        super().__init__(message)
        self.state = state


class RootNotBracketed(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


@dataclass
class RootResult:
    root: float
    residual: float
    iterations: int
    bracket: tuple


def find_root_bracketed(f, lo, hi, tol=ROOT_TOL, maxiter=200) -> RootResult:
    """Root of ``f`` in ``[lo, hi]`` by secant steps safeguarded with bisection.

    A secant (or false-position) candidate is accepted only when it falls
    strictly inside the current bracket and the bracket shrank by at least a
    half over the last two steps; otherwise the step bisects.  Convergence
    is judged on the bracket width alone, since a small residual says little
    when ``f`` is flat near the root.
    """
    a, b = float(lo), float(hi)
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return RootResult(a, 0.0, 0, (a, a))
    if fb == 0.0:
        return RootResult(b, 0.0, 0, (b, b))
    if not (math.isfinite(fa) and math.isfinite(fb)) or fa * fb > 0:
        raise RootNotBracketed(
            f"no sign change on [{a}, {b}]: f(lo)={fa!r}, f(hi)={fb!r}", bracket=(a, b)
        )
    width = abs(b - a)
    x, fx = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for it in range(1, maxiter + 1):
        cand = b - fb * (b - a) / (fb - fa)
        lo_, hi_ = min(a, b), max(a, b)
        if not (lo_ < cand < hi_) or abs(b - a) > 0.5 * width:
            cand = 0.5 * (a + b)
        width = abs(b - a)
        fc = float(f(cand))
        if abs(fc) < abs(fx):
            x, fx = cand, fc
        if fc == 0.0:
            return RootResult(cand, 0.0, it, (cand, cand))
        if fa * fc < 0:
            b, fb = cand, fc
        else:
            a, fa = cand, fc
        if abs(b - a) <= tol * (1.0 + abs(x)):
            lo_, hi_ = min(a, b), max(a, b)
            if not lo_ <= x <= hi_:
                x = cand
                fx = fc
            return RootResult(x, fx, it, (lo_, hi_))
    raise ConvergenceError(
        f"root finder hit {maxiter} iterations", bracket=(min(a, b), max(a, b)), best=x
    )


def _jacobian(F, x, fx, rel_step):
    n = x.size
    J = np.empty((fx.size, n))
    for j in range(n):
        h = rel_step * (1.0 + abs(x[j]))
        xp = x.copy()
        xp[j] += h
        J[:, j] = (np.asarray(F(xp), dtype=float) - fx) / h
    return J


def solve_system(F, x0, tol=SYSTEM_TOL, maxiter=100, positive=True, rel_step=1e-7):
    """Damped Newton iteration for ``F(x) = 0`` with a forward-difference Jacobian.

    Steps are halved until the sup-norm residual decreases (and, when
    ``positive``, until every component stays positive).  Raises
    :class:`ConvergenceError` with the last iterate when no progress is made.
    """
    x = np.array(x0, dtype=float)
    fx = np.asarray(F(x), dtype=float)
    res = np.max(np.abs(fx))
    history = [res]
    for it in range(maxiter):
        if res <= tol:
            return x
        J = _jacobian(F, x, fx, rel_step)
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -fx, rcond=None)[0]
        lam = 1.0
        while lam > 1e-10:
            xn = x + lam * dx
            if positive and np.any(xn <= 0):
                lam *= 0.5
                continue
            try:
                fn = np.asarray(F(xn), dtype=float)
            except (ArithmeticError, ValueError):
                lam *= 0.5
                continue
            rn = np.max(np.abs(fn))
            if np.isfinite(rn) and rn < res:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(
                "line search failed", x=x, residual=res, history=history
            )
        x, fx, res = xn, fn, rn
        history.append(res)
    if res <= tol:
        return x
    raise ConvergenceError(
        f"no convergence in {maxiter} iterations", x=x, residual=res, history=history
    )


def integrate_leg(f, a, b, tol=QUAD_TOL, points=None, return_error=False):
    """Integral of ``f`` over ``[a, b]``, ``b`` possibly ``inf``.

    Adaptive Gauss-Kronrod (QUADPACK qags/qagi).  Interior ``points`` inside a
    finite interval split the range first; for an infinite upper limit the
    finite head up to the last point is integrated separately.
    """
    a = float(a)
    b = float(b)
    if b == a:
        return (0.0, 0.0) if return_error else 0.0
    if b < a:
        raise ValueError("integrate_leg expects a <= b")
    pts = sorted(p for p in (points or ()) if a < p < b)
    pieces = []
    edges = [a] + pts + [b]
    for lo, hi in zip(edges, edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=200, full_output=True)
        val, err = out[0], out[1]
        # a fourth element is only present when QUADPACK flags a problem
        if len(out) > 3 and err > max(100 * tol, 1e3 * tol * abs(val)):
            raise IntegrationError(
                f"quadrature did not converge on [{lo}, {hi}]: {out[3]}",
                partial=math.fsum(v for v, _ in pieces) + val,
                estimate=err,
            )
        pieces.append((val, err))
    total = math.fsum(v for v, _ in pieces)
    error = math.fsum(e for _, e in pieces)
    return (total, error) if return_error else total


def central_derivative(f, x, step=1e-6):
    """Central difference with step relative to ``|x| + 1``."""
    h = step * (abs(x) + 1.0)
    return (np.asarray(f(x + h), dtype=float) - np.asarray(f(x - h), dtype=float)) / (2.0 * h)


def one_sided_derivative(f, x, side, step=1e-6):
    """Second-order one-sided difference; ``side=+1`` uses points right of ``x``."""
    h = side * step * (abs(x) + 1.0)
    f0 = np.asarray(f(x), dtype=float)
    f1 = np.asarray(f(x + h), dtype=float)
    f2 = np.asarray(f(x + 2.0 * h), dtype=float)
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)


def second_derivative(f, x, step=1e-4, side=0):
    """Second difference; ``side`` selects a one-sided stencil near kinks or 0."""
    h = step * (abs(x) + 1.0)
    if side == 0:
        return (np.asarray(f(x + h), dtype=float) - 2.0 * np.asarray(f(x), dtype=float)
                + np.asarray(f(x - h), dtype=float)) / (h * h)
    h *= side
    f0, f1, f2, f3 = (np.asarray(f(x + k * h), dtype=float) for k in range(4))
    return (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h)
