"""
Monte Carlo for the Brownian spider through a scaled spider random walk.

The walk lives on ``{0} U {(k h, i)}``: inside a leg it moves ``+-h`` with
probability 1/2, from the vertex it enters leg ``i`` with probability ``p_i``,
and every step takes time ``h^2``.  Estimates of first-entrance problems use an
exact acceleration: far from the target set and the vertex, the walk jumps to
the exit point of a symmetric interval ``(k - m, k + m)`` with an exit time
drawn from its tabulated distribution.  This changes the cost, not the law of
the walk.

Random numbers come from a counter-based splitmix64 stream per path, keyed by
``(seed, path index)``, so estimates do not depend on scheduling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .diffusion import LegFunction, SpiderModel, SpiderPoint
from .osp import LegSet

__all__ = [
    "SimConfig",
    "EstimateWithError",
    "simulate_discounted_stop",
    "simulate_hitting_laplace",
    "simulate_resolvent",
    "sample_vertex_choices",
]

MAX_LEVEL = 6          # jumps over at most 2**6 = 64 lattice sites
_TAIL = 1e-17          # truncation of the tabulated exit-time distributions
_FAR = np.int64(1) << 62


@dataclass(frozen=True)
class SimConfig:
    """Walk and sampling parameters.

    Attributes
    ----------
    step : float
        Spatial increment ``h``; each step takes time ``h**2``.
    paths : int
        Number of simulated paths.
    horizon : float
        Time cap; paths still running contribute 0.
    seed : int
        64-bit seed of the counter-based generator.
    antithetic : bool
        Pair path ``2j + 1`` with path ``2j`` by using ``1 - u`` for every
        uniform draw.  Standard errors are then computed from pair means.
    """

    step: float = 0.01
    paths: int = 10_000
    horizon: float = 50.0
    seed: int = 20240617
    antithetic: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if int(self.paths) < 1:
            raise ValueError("paths must be at least 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def max_steps(self) -> int:
        return int(math.floor(self.horizon / self.step ** 2 + 1e-9))


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    paths_used: int
    censored_fraction: float = 0.0
    horizon_warning: bool = False
    bias_bound: float = 0.0

    def zscore(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.std_error


# ---------------------------------------------------------------------------
# random numbers
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _stream(seed, index):
    _, a = _splitmix(np.uint64(index))
    return seed ^ a


@nb.njit(cache=True)
def _uniform(state, flip):
    state, z = _splitmix(state)
    u = (np.float64(z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
    if flip:
        u = 1.0 - u
    return state, u


@nb.njit(cache=True)
def _choose_leg(u, cum_p):
    n = cum_p.shape[0]
    for i in range(n - 1):
        if u < cum_p[i]:
            return i
    return n - 1


# ---------------------------------------------------------------------------
# exit-time tables for symmetric intervals
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _exit_cdf(m, tail):
    """CDF of the exit time of a simple random walk from ``(-m, m)`` started at 0."""
    size = 2 * m - 1
    prob = np.zeros(size)
    prob[m - 1] = 1.0
    nxt = np.zeros(size)
    cdf = []
    done = 0.0
    remaining = 1.0
    while remaining > tail:
        out = 0.5 * (prob[0] + prob[size - 1])
        remaining = 0.0
        for j in range(size):
            left = prob[j - 1] if j > 0 else 0.0
            right = prob[j + 1] if j < size - 1 else 0.0
            nxt[j] = 0.5 * (left + right)
            remaining += nxt[j]
        prob, nxt = nxt, prob
        done += out
        cdf.append(done)
    res = np.empty(len(cdf))
    for j in range(len(cdf)):
        res[j] = cdf[j]
    return res


_TABLES = None


def _tables():
    global _TABLES
    if _TABLES is None:
        cdfs = [_exit_cdf(2 ** lvl, _TAIL) for lvl in range(1, MAX_LEVEL + 1)]
        offsets = np.zeros(MAX_LEVEL + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([c.size for c in cdfs])
        _TABLES = (np.concatenate(cdfs), offsets)
    return _TABLES


# ---------------------------------------------------------------------------
# walk kernels
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _distance(leg, k, lo, hi, count):
    d = _FAR
    for j in range(count[leg]):
        a = lo[leg, j]
        b = hi[leg, j]
        if k < a:
            e = a - k
        elif k > b:
            e = k - b
        else:
            return 0
        if e < d:
            d = e
    return d


@nb.njit(cache=True)
def _walk_to_set(n_paths, seed, antithetic, start_leg, start_k, cum_p, lo, hi, count,
                 vertex_in, max_steps, flat, offsets, accelerate):
    stop_leg = np.full(n_paths, -1, dtype=np.int64)
    stop_k = np.zeros(n_paths, dtype=np.int64)
    steps_out = np.zeros(n_paths, dtype=np.int64)
    for path in range(n_paths):
        flip = False
        idx = path
        if antithetic:
            idx = path // 2
            flip = path % 2 == 1
        state = _stream(seed, idx)
        leg = start_leg
        k = start_k
        steps = 0
        while True:
            if steps > max_steps:
                break
            if k == 0:
                if vertex_in:
                    stop_leg[path] = leg
                    stop_k[path] = 0
                    steps_out[path] = steps
                    break
                state, u = _uniform(state, flip)
                leg = _choose_leg(u, cum_p)
                k = 1
                steps += 1
                continue
            d = _distance(leg, k, lo, hi, count)
            if d == 0:
                stop_leg[path] = leg
                stop_k[path] = k
                steps_out[path] = steps
                break
            m = min(d, k)
            level = 0
            if accelerate:
                while level < offsets.shape[0] - 1 and (2 << level) <= m:
                    level += 1
            state, u = _uniform(state, flip)
            if level == 0:
                if u < 0.5:
                    k -= 1
                else:
                    k += 1
                steps += 1
            else:
                a = offsets[level - 1]
                b = offsets[level]
                t = np.searchsorted(flat[a:b], u) + 1
                if t > b - a:
                    t = b - a
                steps += t
                state, u = _uniform(state, flip)
                jump = 1 << level
                if u < 0.5:
                    k -= jump
                else:
                    k += jump
        steps_out[path] = steps
    return stop_leg, stop_k, steps_out


@nb.njit(cache=True)
def _walk_occupation(n_paths, seed, antithetic, start_leg, start_k, cum_p, table, max_steps, decay):
    sums = np.zeros(n_paths)
    escaped = 0
    kmax = table.shape[1] - 1
    for path in range(n_paths):
        flip = False
        idx = path
        if antithetic:
            idx = path // 2
            flip = path % 2 == 1
        state = _stream(seed, idx)
        leg = start_leg
        k = start_k
        disc = 1.0
        acc = 0.0
        for _ in range(max_steps):
            if k <= kmax:
                acc += disc * table[leg, k]
            else:
                escaped += 1
            disc *= decay
            state, u = _uniform(state, flip)
            if k == 0:
                leg = _choose_leg(u, cum_p)
                k = 1
            elif u < 0.5:
                k -= 1
            else:
                k += 1
        sums[path] = acc
    return sums, escaped


@nb.njit(cache=True)
def _vertex_choices(count, seed, cum_p):
    out = np.zeros(cum_p.shape[0], dtype=np.int64)
    state = _stream(seed, 0)
    for _ in range(count):
        state, u = _uniform(state, False)
        out[_choose_leg(u, cum_p)] += 1
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _require_brownian(model):
    if not model.chars.is_brownian:
        raise ValueError("only the Brownian spider is simulated")


def _cum_p(model):
    c = np.cumsum(np.asarray(model.p, dtype=float))
    c[-1] = 1.0
    return c


def _snap(x, h, what):
    k = round(x / h)
    if abs(x / h - k) > 1e-9:
        warnings.warn(f"{what} x={x} is not on the lattice of step {h}; using {k * h}",
                      stacklevel=3)
    return int(k)


def _lattice_set(model, region: LegSet, h):
    width = max(1, max(len(region.intervals_on(k)) for k in range(1, model.n + 1)))
    lo = np.zeros((model.n, width), dtype=np.int64)
    hi = np.zeros((model.n, width), dtype=np.int64)
    count = np.zeros(model.n, dtype=np.int64)
    for leg in range(1, model.n + 1):
        for j, (a, b) in enumerate(region.intervals_on(leg)):
            lo[leg - 1, j] = max(0, round(a / h))
            hi[leg - 1, j] = _FAR if math.isinf(b) else round(b / h)
        count[leg - 1] = len(region.intervals_on(leg))
    # the vertex is handled by its own flag; an interval starting at 0 is
    # entered at k = 0 only through the vertex
    return lo, hi, count


def _summarize(values, cfg, censored, bias):
    values = np.asarray(values, dtype=float)
    if cfg.antithetic and values.size >= 2:
        m = values.size // 2 * 2
        samples = 0.5 * (values[:m:2] + values[1:m:2])
        if values.size > m:
            samples = np.append(samples, values[m:])
    else:
        samples = values
    n = samples.size
    mean = float(np.sum(samples) / n)
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    frac = censored / values.size
    return EstimateWithError(mean=mean, std_error=se, paths_used=n, censored_fraction=frac,
                             horizon_warning=frac > 0.01, bias_bound=bias)


def _run_to_set(model, start, region, cfg, accelerate=True):
    h = cfg.step
    start_k = 0 if start.is_vertex else _snap(start.x, h, "start")
    start_leg = 0 if start.is_vertex else start.leg - 1
    lo, hi, count = _lattice_set(model, region, h)
    flat, offsets = _tables()
    return _walk_to_set(int(cfg.paths), np.uint64(cfg.seed), bool(cfg.antithetic), start_leg,
                        start_k, _cum_p(model), lo, hi, count, bool(region.vertex_included),
                        cfg.max_steps, flat, offsets, accelerate)


def simulate_discounted_stop(model: SpiderModel, start: SpiderPoint, region: LegSet,
                             payoff: LegFunction, cfg: SimConfig,
                             accelerate: bool = True) -> EstimateWithError:
    """Estimate ``E_start[exp(-r tau) g(X_tau)]``, ``tau`` the first entrance to ``region``.

    Region endpoints are snapped to the nearest lattice site.  Paths not
    stopped by ``cfg.horizon`` contribute 0; ``bias_bound`` bounds the effect
    of that convention by ``exp(-r horizon)`` times the largest payoff met at
    a stopping site.
    """
    _require_brownian(model)
    if region.is_empty():
        raise ValueError("the region is empty")
    h = cfg.step
    stop_leg, stop_k, steps = _run_to_set(model, start, region, cfg, accelerate)
    hit = stop_leg >= 0
    values = np.zeros(stop_leg.size)
    cache = {}
    gmax = 0.0
    for leg, k in set(zip(stop_leg[hit].tolist(), stop_k[hit].tolist())):
        cache[(leg, k)] = float(payoff(k * h, leg + 1)) if k > 0 else float(payoff(0.0, 1))
        gmax = max(gmax, abs(cache[(leg, k)]))
    if hit.any():
        gvals = np.array([cache[(a, b)] for a, b in zip(stop_leg[hit].tolist(),
                                                         stop_k[hit].tolist())])
        values[hit] = np.exp(-model.r * steps[hit] * h * h) * gvals
    censored = int(np.count_nonzero(~hit))
    bias = math.exp(-model.r * cfg.horizon) * gmax if censored else 0.0
    return _summarize(values, cfg, censored, bias)


def simulate_hitting_laplace(model: SpiderModel, start: SpiderPoint, target: SpiderPoint,
                             cfg: SimConfig, accelerate: bool = True) -> EstimateWithError:
    """Estimate ``E_start[exp(-r H_target)]``; censored paths contribute 0."""
    _require_brownian(model)
    if start == target:
        return EstimateWithError(1.0, 0.0, int(cfg.paths))
    n = model.n
    if target.is_vertex:
        target_set = LegSet(tuple(() for _ in range(n)), True)
    else:
        k = _snap(target.x, cfg.step, "target") * cfg.step
        ivs = [() for _ in range(n)]
        ivs[target.leg - 1] = ((k, k),)
        target_set = LegSet(tuple(ivs), False)
    one = LegFunction(func=lambda x, leg: 1.0, label="one")
    est = simulate_discounted_stop(model, start, target_set, one, cfg, accelerate)
    return est


def simulate_resolvent(model: SpiderModel, start: SpiderPoint, f: LegFunction, cfg: SimConfig,
                       reach: Optional[float] = None) -> EstimateWithError:
    """Estimate ``G_r f(start)``, the expected discounted occupation integral of ``f``.

    The walk is held at each site for time ``h^2``, so each step contributes
    ``exp(-r t_k) f(X_k) (1 - exp(-r h^2)) / r``; the constant function is
    then integrated exactly up to the horizon.  ``f`` is tabulated on the
    lattice up to distance ``reach`` (default ``12 sqrt(horizon)`` plus the
    start), beyond which it is taken as 0 and ``bias_bound`` is set to inf.
    """
    _require_brownian(model)
    h = cfg.step
    start_k = 0 if start.is_vertex else _snap(start.x, h, "start")
    start_leg = 0 if start.is_vertex else start.leg - 1
    if reach is None:
        reach = 12.0 * math.sqrt(cfg.horizon) + start_k * h
    kmax = int(math.ceil(reach / h))
    table = np.empty((model.n, kmax + 1))
    xs = np.arange(kmax + 1) * h
    for leg in range(1, model.n + 1):
        table[leg - 1] = [float(f(x, leg)) for x in xs]
    table[:, 0] = float(f(0.0, 1))
    if not np.all(np.isfinite(table)):
        raise ValueError("f is not finite on the lattice range")
    decay = math.exp(-model.r * h * h)
    sums, escaped = _walk_occupation(int(cfg.paths), np.uint64(cfg.seed), bool(cfg.antithetic),
                                     start_leg, start_k, _cum_p(model), table, cfg.max_steps,
                                     decay)
    values = sums * (1.0 - decay) / model.r
    fmax = float(np.max(np.abs(table)))
    bias = math.exp(-model.r * cfg.horizon) * fmax / model.r
    if escaped:
        bias = math.inf
    return _summarize(values, cfg, 0, bias)


def sample_vertex_choices(model: SpiderModel, count: int, seed: int = 1) -> np.ndarray:
    """Leg counts of ``count`` departures from the vertex, using the walk's own rule."""
    return _vertex_choices(int(count), np.uint64(seed), _cum_p(model))
