"""
Command-line front end ``spider-stop``.

Subcommands: ``green``, ``hit``, ``excessive check``, ``solve {example71,
linear, quadratic}``, ``simulate {hit, stop, resolvent}`` and ``reproduce``.
Model parameters come from flags or from a ``key=value`` config file
(``--config``) with section prefixes, e.g. ``model.n=3``; flags win.

Exit codes: 0 success, 1 usage error, 2 numerical or I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .diffusion import SpiderModel, SpiderPoint, VERTEX, available_characteristics, get_characteristics
from .excessive import (
    gluing_value,
    is_excessive,
    representing_measure_at_vertex,
    reward_decomposition,
)
from .kernels import (
    green_kernel,
    harmonic_function,
    harmonic_leg_function,
    hitting_laplace,
    minimal_excessive_leg_function,
    phi_leg_function,
    psi_tilde,
    skew_psi,
)
from .diffusion import LegFunction
from .numerics import NumericalError
from .osp import (
    ThresholdFamily,
    example71_payoff,
    solve_example71,
    solve_threshold_system,
    vertex_in_continuation,
)

__all__ = ["main", "run", "emit_table", "parse_point", "format_point", "UsageError"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def parse_point(text: str) -> SpiderPoint:
    """``x@leg`` or ``0`` (the vertex); ``inf@k`` is the point at infinity of leg ``k``."""
    text = text.strip()
    if "@" not in text:
        x = float(text)
        if x != 0:
            raise UsageError(f"point {text!r} needs a leg: write x@leg")
        return VERTEX
    xs, legs = text.split("@", 1)
    try:
        x, leg = float(xs), int(legs)
    except ValueError:
        raise UsageError(f"malformed point {text!r}; expected x@leg") from None
    if x < 0 or leg < 1:
        raise UsageError(f"malformed point {text!r}: need x >= 0 and leg >= 1")
    return SpiderPoint(x, leg)


def format_point(pt: SpiderPoint) -> str:
    if pt.is_vertex:
        return "0"
    return f"{pt.x:g}@{pt.leg}"


def _parse_vector(text: str, what: str) -> list:
    try:
        return [Fraction(s.strip()) for s in str(text).split(",") if s.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"malformed {what} vector {text!r}") from None


def _read_config(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for num, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in ("model", "output", "command") or not name:
            raise UsageError(f"{path}:{num}: unknown key {key!r}")
        name = name.replace("-", "_")
        out[_CONFIG_ALIASES.get((section, name), name)] = value
    return out


# config keys whose argparse destination has a different name
_CONFIG_ALIASES = {
    ("output", "path"): "output",
    ("model", "characteristics"): "chars",
    ("command", "name"): "command_name",
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(value, precision):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value) + 0.0:.{precision}g}"
    if isinstance(value, SpiderPoint):
        return format_point(value)
    return str(value)


def emit_table(rows, schema: Sequence[str], fmt: str = "table", precision: int = 6,
               stream=None) -> str:
    """Render rows as an aligned table or as CSV (header first, ``\\n`` line ends).

    Returns the rendered text and writes it to ``stream`` when given.
    """
    cells = [[_fmt(v, precision) for v in row] for row in rows]
    for row in cells:
        if len(row) != len(schema):
            raise ValueError(f"row {row} does not match schema {list(schema)}")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(schema)
        writer.writerows(cells)
        text = buf.getvalue()
    elif fmt == "table":
        widths = [max([len(h)] + [len(r[j]) for r in cells]) for j, h in enumerate(schema)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(schema, widths))]
        lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if stream is not None:
        stream.write(text)
    return text


class _Output:
    def __init__(self, args):
        self.fmt = args.format
        self.precision = args.precision
        self.path = args.output
        self.parts = []
        self.notes = []

    def table(self, rows, schema, title=None):
        if self.fmt == "table" and title:
            self.parts.append(f"# {title}\n")
        self.parts.append(emit_table(rows, schema, self.fmt, self.precision))

    def note(self, text):
        self.notes.append(text)

    def flush(self, out, err):
        body = ("\n" if self.fmt == "table" else "").join(self.parts)
        notes = "".join(n + "\n" for n in self.notes)
        if self.fmt == "table":
            body = notes + body
        elif notes:
            err.write(notes)
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(body)
        else:
            out.write(body)


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="key=value file (model.n=3, output.format=csv, ...)")
    g.add_argument("--n", type=int, help="number of legs (default 3)")
    g.add_argument("--p", help="leg probabilities, e.g. 1/3,1/3,1/3 (default uniform)")
    g.add_argument("--r", type=float, help="discount rate (default 0.5)")
    g.add_argument("--chars", help=f"leg diffusion, one of {available_characteristics()}")
    g.add_argument("--chars-param", action="append", default=[], metavar="KEY=VALUE",
                   help="parameter of the leg diffusion (repeatable)")
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("table", "csv"), default="table")
    o.add_argument("--precision", type=int, default=6, help="significant digits")
    o.add_argument("--output", help="write to this file instead of stdout")


def _grid_args(p, xmax=3.0, points=31):
    p.add_argument("--xmax", type=float, default=xmax)
    p.add_argument("--points", type=int, default=points)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spider-stop", description="Optimal stopping for diffusion spiders.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("green", help="Green kernel values or a grid")
    _common(p)
    p.add_argument("--from", dest="source", default="0")
    p.add_argument("--to", dest="target")
    p.add_argument("--to-leg", type=int, help="tabulate along this leg instead of --to")
    _grid_args(p)

    p = sub.add_parser("hit", help="Laplace transform of hitting times")
    _common(p)
    p.add_argument("--from", dest="source", default="0")
    p.add_argument("--to", dest="target")
    p.add_argument("--to-leg", type=int, help="tabulate targets along this leg")
    _grid_args(p)

    p = sub.add_parser("excessive", help="excessivity diagnostics")
    esub = p.add_subparsers(dest="action", parser_class=_Parser)
    c = esub.add_parser("check", help="tail table of the representing measure")
    _common(c)
    c.add_argument("--function", default="phi",
                   choices=("phi", "harmonic", "minimal", "psi-plus-one", "example71"))
    c.add_argument("--a", help="harmonic coefficients")
    c.add_argument("--pole", help="pole of the minimal function (x@leg or inf@leg)")
    _grid_args(c, xmax=3.0, points=30)

    p = sub.add_parser("solve", help="solve a stopping problem")
    ssub = p.add_subparsers(dest="problem", parser_class=_Parser)
    for name in ("example71", "linear", "quadratic"):
        s = ssub.add_parser(name)
        _common(s)
        if name != "example71":
            s.add_argument("--A", help="payoff coefficients, e.g. 1,2,3")
            s.add_argument("--method", choices=("auto", "closed-form", "quadrature"),
                           default="auto")
        s.add_argument("--table", choices=("summary", "thresholds", "diagnostics", "value"),
                       default="summary", help="what to print (summary = all tables)")
        _grid_args(s, xmax=4.0, points=41)

    p = sub.add_parser("simulate", help="Monte Carlo estimates")
    msub = p.add_subparsers(dest="target_kind", parser_class=_Parser)
    for name in ("hit", "stop", "resolvent"):
        s = msub.add_parser(name)
        _common(s)
        s.add_argument("--step", type=float, default=0.01)
        s.add_argument("--paths", type=int, default=20000)
        s.add_argument("--horizon", type=float, default=50.0)
        s.add_argument("--seed", type=int, default=20240617)
        s.add_argument("--antithetic", action="store_true")
        s.add_argument("--from", dest="source", default="0")
        if name == "hit":
            s.add_argument("--to", dest="target", default="1@1")
        if name == "stop":
            s.add_argument("--family", choices=("linear", "quadratic", "example71"),
                           default="linear")
            s.add_argument("--A", default="1,2,3")
        if name == "resolvent":
            s.add_argument("--function", choices=("one", "phi", "leg1"), default="one")

    p = sub.add_parser("reproduce", help="recompute every reference number")
    _common(p)
    return parser


def _subparser(parser, argv):
    """The innermost parser selected by ``argv`` (for config defaults)."""
    node = parser
    for tok in argv:
        actions = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions or tok not in actions[0].choices:
            if tok.startswith("-"):
                continue
            break
        node = actions[0].choices[tok]
    return node


def _apply_config(parser, argv):
    """Install config-file values as parser defaults; returns the (possibly extended) argv.

    ``command.name`` (e.g. ``solve linear``) supplies the subcommand when the
    command line has none.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    values = _read_config(known.config)
    name = values.pop("command_name", None)
    if name and (not argv or argv[0].startswith("-")):
        argv = name.split() + list(argv)
    node = _subparser(parser, argv)
    dests = {a.dest for a in node._actions}
    unknown = [k for k in values if k not in dests]
    if unknown:
        raise UsageError(f"config keys not understood by this command: {unknown}")
    conv = {a.dest: a for a in node._actions}
    defaults = {}
    for k, v in values.items():
        act = conv[k]
        if isinstance(act, argparse._AppendAction):
            defaults[k] = [s.strip() for s in v.split(";") if s.strip()]
        elif isinstance(act, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes")
        elif act.type is not None:
            try:
                defaults[k] = act.type(v)
            except ValueError:
                raise UsageError(f"config value {k}={v!r} is malformed") from None
        else:
            defaults[k] = v
    node.set_defaults(**defaults)
    return argv


def _model(args) -> SpiderModel:
    r = 0.5 if args.r is None else args.r
    if args.p is not None:
        p = _parse_vector(args.p, "probability")
        if args.n is not None and args.n != len(p):
            raise UsageError(f"--n {args.n} conflicts with {len(p)} probabilities")
        n = len(p)
    else:
        n = 3 if args.n is None else args.n
        if n < 1:
            raise UsageError("--n must be positive")
        p = [Fraction(1, n)] * n
    if sum(p) != 1:
        if abs(float(sum(p)) - 1.0) > 1e-12:
            raise UsageError(f"probabilities sum to {float(sum(p))}, not 1")
    params = {}
    for item in args.chars_param:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--chars-param expects KEY=VALUE, got {item!r}")
        params[key.strip()] = float(value)
    name = args.chars or "brownian"
    try:
        chars = get_characteristics(name, **params)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"characteristics {name!r}: {exc}") from None
    return SpiderModel(n, tuple(p), r, chars)


def _grid(args):
    if args.points < 2 or not args.xmax > 0:
        raise UsageError("--points must be >= 2 and --xmax > 0")
    return np.linspace(0.0, args.xmax, args.points)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_green(args, out):
    model = _model(args)
    src = parse_point(args.source)
    if args.to_leg is not None:
        model.check_leg(args.to_leg)
        rows = []
        for y in _grid(args):
            tgt = SpiderPoint(float(y), args.to_leg)
            v = green_kernel(model, src, tgt)
            rows.append((format_point(src), format_point(tgt), v.branch.value, v.value))
    else:
        if args.target is None:
            raise UsageError("give --to or --to-leg")
        tgt = parse_point(args.target)
        v = green_kernel(model, src, tgt)
        rows = [(format_point(src), format_point(tgt), v.branch.value, v.value)]
    out.table(rows, ("from", "to", "branch", "value"))


def _cmd_hit(args, out):
    model = _model(args)
    src = parse_point(args.source)
    if args.to_leg is not None:
        model.check_leg(args.to_leg)
        targets = [SpiderPoint(float(y), args.to_leg) for y in _grid(args)]
    else:
        if args.target is None:
            raise UsageError("give --to or --to-leg")
        targets = [parse_point(args.target)]
    rows = [(format_point(src), format_point(t), hitting_laplace(model, src, t)) for t in targets]
    out.table(rows, ("from", "to", "laplace"))


def _cmd_excessive(args, out):
    if args.action != "check":
        raise UsageError("usage: spider-stop excessive check [...]")
    model = _model(args)
    kind = args.function
    if kind == "phi":
        f = phi_leg_function(model)
    elif kind == "harmonic":
        a = [float(v) for v in _parse_vector(args.a or ",".join(["1"] * model.n), "coefficient")]
        f = harmonic_leg_function(model, a)
    elif kind == "minimal":
        if not args.pole:
            raise UsageError("--pole is required for --function minimal")
        f = minimal_excessive_leg_function(model, parse_point(args.pole))
    elif kind == "psi-plus-one":
        f = LegFunction(func=lambda x, leg: float(model.psi_killed(x)) + 1.0,
                        dx=lambda x, leg, side=1: float(model.dpsi_killed(x, side) * model.dscale(x)),
                        label="psi+1")
    else:
        f = solve_example71(model, verify=False).value
    grid = _grid(args)
    grid = grid[grid > 0]
    rep = is_excessive(model, f, grid)
    out.note(f"verdict: {'excessive' if rep.verdict else 'NOT excessive'}; "
             f"gluing value {rep.gluing:.{args.precision}g}")
    for msg in rep.failures:
        out.note(f"  {msg}")
    out.table(rep.rows(), ("leg", "x", "tail", "monotonicity_residual"))


def _value_rows(model, sol, grid):
    rows = []
    for leg in range(1, model.n + 1):
        for x in grid:
            rows.append((leg, float(x), float(sol.value(x, leg)), float(sol.payoff(x, leg))))
    return rows


def _cmd_solve(args, out):
    if args.problem is None:
        raise UsageError("usage: spider-stop solve {example71,linear,quadratic} [...]")
    model = _model(args)
    t0 = time.perf_counter()
    if args.problem == "example71":
        sol = solve_example71(model)
        rows = [(name, SpiderPoint(x, {"x2": 2, "x3": 3, "z1": 1}[name]), x)
                for name, x in sol.diagnostics["thresholds"].items()]
        out.note(f"case ({sol.label}); region: {_describe(sol.region)}")
    else:
        if not args.A:
            raise UsageError("--A is required")
        A = tuple(float(v) for v in _parse_vector(args.A, "coefficient"))
        if len(A) != model.n:
            raise UsageError(f"--A has {len(A)} entries for {model.n} legs")
        sol = solve_threshold_system(model, ThresholdFamily(args.problem, A), method=args.method)
        rows = [(f"z{i + 1}", SpiderPoint(z, i + 1), z) for i, z in enumerate(sol.thresholds)]
        if not sol.diagnostics["reference_regime"]:
            out.note("note: no published reference values exist for this model/discount rate")
    elapsed = time.perf_counter() - t0
    rep = sol.diagnostics["verification"]
    out.note(f"solved in {elapsed:.3f} s; verification "
             f"{'passed' if rep.passed else 'certified' if rep.certified else 'FAILED'}"
             + ("" if rep.passed else f" (failed: {', '.join(rep.failed())})"))
    out.note(f"value at the vertex: {sol.value(0.0, 1):.{args.precision}g}")
    which = args.table
    if which in ("summary", "thresholds"):
        out.table(rows, ("name", "point", "threshold"), "thresholds")
    if which in ("summary", "diagnostics"):
        out.table(rep.rows(), ("check", "status", "detail"), "diagnostics")
    if which in ("summary", "value"):
        out.table(_value_rows(model, sol, _grid(args)), ("leg", "x", "value", "payoff"),
                  "value function")
    return 0


def _describe(region):
    parts = []
    for leg, ivs in enumerate(region.intervals, start=1):
        for a, b in ivs:
            parts.append(f"leg {leg} [{a:.6g}, {b:.6g}]")
    if region.vertex_included:
        parts.append("vertex")
    return ", ".join(parts) or "empty"


def _cmd_simulate(args, out):
    from .simulator import SimConfig, simulate_discounted_stop, simulate_hitting_laplace, \
        simulate_resolvent
    from .osp import resolvent_apply

    if args.target_kind is None:
        raise UsageError("usage: spider-stop simulate {hit,stop,resolvent} [...]")
    model = _model(args)
    cfg = SimConfig(step=args.step, paths=args.paths, horizon=args.horizon, seed=args.seed,
                    antithetic=args.antithetic)
    src = parse_point(args.source)
    if args.target_kind == "hit":
        tgt = parse_point(args.target)
        est = simulate_hitting_laplace(model, src, tgt, cfg)
        ref = hitting_laplace(model, src, tgt)
    elif args.target_kind == "stop":
        if args.family == "example71":
            sol = solve_example71(model, verify=False)
        else:
            A = tuple(float(v) for v in _parse_vector(args.A, "coefficient"))
            sol = solve_threshold_system(model, ThresholdFamily(args.family, A), verify=False)
        est = simulate_discounted_stop(model, src, sol.region, sol.payoff, cfg)
        ref = float(sol.value(src.x, src.leg))
    else:
        f = {"one": LegFunction(func=lambda x, leg: 1.0),
             "phi": phi_leg_function(model),
             "leg1": LegFunction(func=lambda x, leg: 1.0 if (leg == 1 and x > 0) else 0.0)}[
            args.function]
        est = simulate_resolvent(model, src, f, cfg)
        ref = resolvent_apply(model, f, src)
    if est.horizon_warning:
        out.note(f"warning: {100 * est.censored_fraction:.1f}% of paths censored at the horizon "
                 f"(bias bound {est.bias_bound:.3g})")
    out.table([(est.mean, est.std_error, est.censored_fraction, est.paths_used, ref,
                est.zscore(ref))],
              ("estimate", "std_error", "censor_rate", "paths_used", "reference", "z"))


def reproduce_rows() -> list:
    """``(quantity, reference, computed, tolerance, passed)`` for every reference number."""
    rows = []

    def add(name, ref, val, tol):
        rows.append((name, float(ref), float(val), tol, bool(abs(val - ref) <= tol)))

    m = SpiderModel.brownian(3, r=0.5)
    add("c_r at r=1/2", 1.0, m.cr, 1e-10)
    add("g_r(0,0) at r=1/2", 1.0, green_kernel(m, VERTEX, VERTEX).value, 1e-10)
    xs = np.linspace(0.0, 5.0, 51)
    inc = all(float(psi_tilde(m, b, 1)) > float(psi_tilde(m, a, 1)) for a, b in zip(xs, xs[1:]))
    add("psi_tilde increasing (1 = yes)", 1.0, float(inc), 0.0)
    m2 = SpiderModel(2, (0.3, 0.7), 0.5)
    th = m2.theta
    add("skew psi vs (1-2p)/p sinh + e^{theta x} at x=1, p=0.3",
        (1 - 2 * 0.3) / 0.3 * math.sinh(th) + math.exp(th), th * skew_psi(m2, 1.0, 1), 1e-10)
    a = (0.5, 1.0, 2.0)
    x = 0.7
    add("harmonic function (a_i/p_i) sinh + e^{-x} sum a at (0.7, leg 2)",
        a[1] * 3 * math.sinh(x) + math.exp(-x) * sum(a),
        harmonic_function(m, a, SpiderPoint(x, 2)), 1e-10)
    g71 = example71_payoff()
    add("gluing value of the three-leg payoff", -0.5, gluing_value(m, g71), 1e-10)
    fmin = minimal_excessive_leg_function(m, SpiderPoint(1.0, 2))
    atom = representing_measure_at_vertex(m, fmin).atom_at(1.0, 2)
    add("atom of a minimal excessive function at its pole (>= 0)", 1.0, atom, 1e-8)
    psi1 = LegFunction(func=lambda x, leg: float(m.psi_killed(x)) + 1.0,
                       dx=lambda x, leg, side=1: float(m.dpsi_killed(x, side)))
    add("gluing value of psi_killed + 1", 1.0, gluing_value(m, psi1), 1e-10)
    add("psi_killed + 1 rejected (1 = rejected)", 1.0,
        float(not is_excessive(m, psi1, np.linspace(0.1, 3, 30)).verdict), 0.0)

    fam_lin = ThresholdFamily("linear", (1.0, 2.0, 3.0))
    fam_quad = ThresholdFamily("quadratic", (1.0, 2.0, 3.0))
    dec = reward_decomposition(m, fam_lin.payoff())
    add("linear payoff: delta0 = -sum p_i A_i", -2.0, dec.delta0, 1e-10)
    add("linear payoff: density r A_2 x at x=1", 1.0, dec.density(1.0, 2), 1e-10)
    dec = reward_decomposition(m, fam_quad.payoff())
    add("quadratic payoff: delta0", 0.0, dec.delta0, 1e-10)
    add("quadratic payoff: density A_3 (r x^2 - 1) at x=1.5", 0.375, dec.density(1.5, 3), 1e-10)
    add("linear payoff: vertex in continuation (1 = yes)", 1.0,
        float(vertex_in_continuation(m, fam_lin.payoff())), 0.0)
    add("three-leg payoff: vertex test inconclusive (0 = no)", 0.0,
        float(vertex_in_continuation(m, g71)), 0.0)

    sol = solve_example71(0.125, verify=False)
    add("three-leg payoff: z1 at r=1/8", 0.0, sol.diagnostics["thresholds"]["z1"], 1e-10)
    sol = solve_example71(0.05, verify=False)
    K = sol.diagnostics["K"]
    add("three-leg payoff, r=0.05: K > 1 (1 = yes)", 1.0, float(K > 1.0), 0.0)
    add("three-leg payoff, r=0.05: value at vertex equals K", K, sol.value(0.0, 2), 1e-10)
    z = sol.diagnostics["thresholds"]["z1"]
    h = 1e-6
    slope = (3 * sol.value(z, 1) - 4 * sol.value(z - h, 1) + sol.value(z - 2 * h, 1)) / (2 * h)
    add("three-leg payoff, r=0.05: V'(z1-) = 1", 1.0, slope, 1e-6)

    lin = solve_threshold_system(m, fam_lin, verify=False)
    for i, ref in enumerate((1.4816, 1.2041, 1.0628)):
        add(f"linear thresholds z{i + 1}", ref, lin.thresholds[i], 5e-4)
    quad = solve_threshold_system(m, fam_quad, verify=False)
    for i, ref in enumerate((2.16987, 2.06543, 2.02250)):
        add(f"quadratic thresholds z{i + 1}", ref, quad.thresholds[i], 5e-5)
    from .osp import boundary_residual
    worst = max(abs(boundary_residual(m, lin.payoff, lin.region, SpiderPoint(z, i + 1)))
                for i, z in enumerate(lin.thresholds))
    add("linear: boundary equation residual at the thresholds", 0.0, worst, 1e-8)
    return rows


def _cmd_reproduce(args, out):
    rows = reproduce_rows()
    out.table([(n, ref, val, tol, "pass" if ok else "FAIL") for n, ref, val, tol, ok in rows],
              ("quantity", "reference", "computed", "tolerance", "status"))
    failed = sum(1 for r in rows if not r[4])
    out.note(f"{len(rows) - failed}/{len(rows)} reference checks passed")
    return 0 if failed == 0 else 2


COMMANDS = {
    "green": _cmd_green,
    "hit": _cmd_hit,
    "excessive": _cmd_excessive,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "reproduce": _cmd_reproduce,
}


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, dispatch and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if getattr(args, "precision", 6) < 1:
            raise UsageError("--precision must be >= 1")
        out = _Output(args)
        code = COMMANDS[args.command](args, out) or 0
        out.flush(stdout, stderr)
        return code
    except UsageError as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        stderr.write(f"numerical failure: {exc}\n")
        for key, value in getattr(exc, "state", {}).items():
            stderr.write(f"  {key}: {value}\n")
        return 2
    except (ValueError, KeyError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        stderr.write(f"I/O error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
