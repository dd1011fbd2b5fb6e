"""Command-line harness: end-to-end runs, convergence and comparison studies.

Curves are written as CSV (shortest round-trip float formatting), solver
reports as JSON.  Exit codes: 0 success, 2 usage or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import closedform, model
from .density import (
    backward_curve,
    expected_hitting_time,
    forward_curve,
    survival_long_horizon,
)
from .errors import OUFPTError, PrecisionExhausted, SolverBreakdown
from .kernels import abel_backward_spec, abel_forward_spec
from .reference import (
    CNConfig,
    MCConfig,
    StehfestConfig,
    crank_nicolson_cdf,
    gaver_stehfest_density,
    mc_hitting_cdf,
)
from .volterra import Scheme, TimeGrid, abel_nu_backward, abel_nu_forward, solve_block_quadratic, solve_trapezoidal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULT_LADDER = tuple(2 ** k for k in range(6, 13))
LADDER_END = 0.5
ABEL_FORWARD = (1.0, 0.5)  # (z, b)
ABEL_BACKWARD_B = 0.5
METHODS = (
    "forward",
    "backward",
    "closed-form",
    "leblanc",
    "crank-nicolson",
    "gaver-stehfest",
    "monte-carlo",
)


class ConfigError(Exception):
    """Bad command-line or config-file input (exit code 2)."""


# --------------------------------------------------------------------------
# reports and order fitting


@dataclass
class SolverReport:
    scheme: str
    problem: str
    n: list[int]
    h: list[float]
    max_abs_error: list[float]
    mean_abs_error: list[float]
    rms_error: list[float]
    wall_time: float
    norm: str = "rms"
    order: float | None = None
    points_used: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def fit_order(h, err, tolerance: float = 0.10) -> tuple[float | None, list[int]]:
    """Least-squares slope of ``log err`` against ``log h``.

    Needs at least three points.  If some error deviates from the fitted
    power law by more than ``tolerance`` (relative), the two coarsest points
    are dropped and the fit is repeated.  Returns the order and the indices
    used.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    idx = [i for i in range(h.size) if err[i] > 0 and np.isfinite(err[i])]
    if len(idx) < 3:
        return None, idx
    slope, resid = _loglog(h[idx], err[idx])
    if resid > tolerance and len(idx) >= 5:
        coarse = sorted(idx, key=lambda i: -h[i])[:2]
        idx = [i for i in idx if i not in coarse]
        slope, _ = _loglog(h[idx], err[idx])
    return float(slope), idx


def _loglog(h, err):
    x, y = np.log(h), np.log(err)
    slope, icpt = np.polyfit(x, y, 1)
    return slope, float(np.max(np.abs(np.expm1(y - (slope * x + icpt)))))


def run_ladder(problem: str, scheme: Scheme, ladder=DEFAULT_LADDER, end: float = LADDER_END, norm: str = "rms") -> SolverReport:
    """Solve an Abel benchmark on each grid of the ladder and fit the order."""
    if problem == "forward":
        z, b = ABEL_FORWARD
        spec, exact = abel_forward_spec(z, b, end), (lambda x: abel_nu_forward(x, z, b))
    elif problem == "backward":
        spec, exact = abel_backward_spec(ABEL_BACKWARD_B, end), (lambda x: abel_nu_backward(x, ABEL_BACKWARD_B))
    else:
        raise ConfigError(f"unknown ladder problem {problem!r}")
    solver = solve_block_quadratic if scheme is Scheme.BLOCK_QUADRATIC else solve_trapezoidal
    hs, emax, emean, erms, notes = [], [], [], [], []
    start = time.perf_counter()
    for n in ladder:
        grid = TimeGrid.uniform(end, n)
        nu = solver(spec, grid)
        diff = nu.values - exact(grid.nodes)
        hs.append(end / n)
        emax.append(float(np.max(np.abs(diff))))
        emean.append(float(np.mean(np.abs(diff))))
        erms.append(float(np.sqrt(np.mean(diff * diff))))
        notes.extend(nu.warnings)
    wall = time.perf_counter() - start
    errs = {"rms": erms, "max": emax, "mean": emean}[norm]
    order, used = fit_order(hs, errs)
    return SolverReport(
        scheme=scheme.value,
        problem=f"abel-{problem}",
        n=list(ladder),
        h=hs,
        max_abs_error=emax,
        mean_abs_error=emean,
        rms_error=erms,
        wall_time=wall,
        norm=norm,
        order=order,
        points_used=[int(ladder[i]) for i in used],
        warnings=notes,
    )


# --------------------------------------------------------------------------
# studies


@dataclass(frozen=True)
class Problem:
    z: float
    b: float
    rate: float = 1.0
    orientation: model.Orientation = model.Orientation.FROM_ABOVE


def method_curves(methods, problem: Problem, t, n: int, opts: dict) -> dict:
    """Dimensionless ``{method: (g or None, G or None)}`` on the times ``t``."""
    z, b = problem.z, problem.b
    out = {}
    for name in methods:
        if name == "forward":
            c = forward_curve(z, b, t, n)
            out[name] = (c.g, c.G)
        elif name == "backward":
            c = backward_curve(z, b, t, n)
            out[name] = (c.g, c.G)
        elif name == "closed-form":
            if b != 0.0:
                raise ConfigError("closed-form results exist only for a barrier at the mean (b = 0)")
            out[name] = (closedform.density_b0(t, z), closedform.cdf_b0(t, z))
        elif name == "leblanc":
            out[name] = (closedform.leblanc_density(t, z, b), closedform.leblanc_cdf(t, z, b))
        elif name == "crank-nicolson":
            G = crank_nicolson_cdf([z], t, b, CNConfig(h=opts["cn_h"], k=opts["cn_k"]))[:, 0]
            out[name] = (np.gradient(G, t) if t.size > 2 else None, G)
        elif name == "gaver-stehfest":
            cfg = StehfestConfig(opts["stehfest_m"], opts["digits"])
            g = np.array([gaver_stehfest_density(tk, z, b, cfg) if tk > 0 else 0.0 for tk in t])
            out[name] = (g, None)
        elif name == "monte-carlo":
            cfg = MCConfig(
                paths=opts["paths"], dt=opts["dt"], horizon=float(t.max()), seed=opts["seed"],
                workers=opts["workers"],
            )
            out[name] = (None, mc_hitting_cdf(z, b, cfg, t).cdf)
        else:
            raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return out


def _g_at_horizon(args):
    z, b, t_end, step = args
    if not z > b:
        return 1.0
    survival, _ = survival_long_horizon(z, b, [t_end], step)
    return float(1.0 - survival[0])


def asymptotic_sweep(z: float, bs, t_end: float = 500.0, step: float = 0.02, workers: int = 1):
    """``G(t_end, z)`` for each barrier in ``bs`` (t_end may exceed the forward-map limit)."""
    jobs = [(z, float(b), t_end, step) for b in bs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_g_at_horizon, jobs))
    return [_g_at_horizon(j) for j in jobs]


def _expected_cell(args):
    z, b, t_max, tail_tol = args
    if z == b:
        return 0.0, False
    if z < b:  # hitting from below mirrors to hitting from above
        z, b = -z, -b
    return expected_hitting_time(z, b, t_max, tail_tol)


def expected_time_surface(zs, bs, t_max: float = 50.0, tail_tol: float = 1e-3, workers: int = 1):
    """Rows ``(z, b, E, tail_flag)`` in row-major (z, b) order."""
    cells = [(float(z), float(b), t_max, tail_tol) for z, b in itertools.product(zs, bs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_expected_cell, cells))
    else:
        results = [_expected_cell(c) for c in cells]
    return [(c[0], c[1], e, flag) for c, (e, flag) in zip(cells, results)]


# --------------------------------------------------------------------------
# I/O helpers


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | None, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _diag(msg: str, kind: str = "error") -> None:
    use_color = sys.stderr.isatty() and "NO_COLOR" not in os.environ
    prefix = f"{kind}:"
    if use_color:
        code = "31" if kind == "error" else "33"
        prefix = f"\033[{code}m{prefix}\033[0m"
    print(f"{prefix} {msg}", file=sys.stderr)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _names(text) -> list[str]:
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    return [s.strip() for s in items if s.strip()]


def _problem(args) -> Problem:
    if args.z is None:
        raise ConfigError("--z is required")
    if args.b is None:
        raise ConfigError("--b is required")
    raw = any(v is not None for v in (args.rate, args.mean, args.sigma))
    params = model.OUParams(
        rate=1.0 if args.rate is None else args.rate,
        mean=0.0 if args.mean is None else args.mean,
        sigma=1.0 if args.sigma is None else args.sigma,
        start=args.z,
        barrier=args.b,
    )
    norm = model.normalize(params)
    if not raw and norm.orientation is model.Orientation.FROM_BELOW:
        _diag("start below the barrier: solving the mirrored problem", "note")
    return Problem(norm.z, norm.b, norm.rate, norm.orientation)


def _times(args, problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    """Physical output times and the matching dimensionless times."""
    if not args.t_end > 0:
        raise ConfigError("--t-end must be positive")
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    t_phys = np.linspace(0.0, args.t_end, args.points + 1)
    return t_phys, problem.rate * t_phys


def _opts(args) -> dict:
    return {
        "stehfest_m": args.stehfest_m,
        "digits": args.digits,
        "seed": args.seed,
        "paths": args.paths,
        "dt": args.dt,
        "workers": args.workers,
        "cn_h": args.cn_h,
        "cn_k": args.cn_k,
    }


# --------------------------------------------------------------------------
# commands


def cmd_density(args) -> int:
    problem = _problem(args)
    t_phys, t = _times(args, problem)
    curves = method_curves(_names(args.method), problem, t, args.n, _opts(args))
    rows = []
    for name, (g, G) in curves.items():
        for i, tp in enumerate(t_phys):
            rows.append((
                tp,
                problem.rate * g[i] if g is not None else math.nan,
                G[i] if G is not None else math.nan,
                name,
            ))
    write_csv(args.out, ("t", "g", "G", "method"), rows)
    return EXIT_OK


def cmd_convergence(args) -> int:
    ladder = tuple(int(v) for v in _floats(args.ladder))
    if any(n % 2 or n < 4 for n in ladder):
        raise ConfigError("ladder sizes must be even and at least 4")
    problems = ["forward", "backward"] if args.problem == "both" else [args.problem]
    schemes = [_scheme(s) for s in _names(args.scheme)]
    reports, rows = [], []
    for problem, scheme in itertools.product(problems, schemes):
        rep = run_ladder(problem, scheme, ladder, args.end, args.norm)
        reports.append(rep)
        for n, h, e1, e2, e3 in zip(rep.n, rep.h, rep.max_abs_error, rep.mean_abs_error, rep.rms_error):
            rows.append((rep.problem, rep.scheme, n, h, e1, e2, e3))
    write_csv(args.out, ("problem", "scheme", "n", "h", "max_abs_error", "mean_abs_error", "rms_error"), rows)
    payload = json.dumps([asdict(r) for r in reports], indent=2)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload, file=sys.stderr)
    return EXIT_OK


def _scheme(name: str) -> Scheme:
    aliases = {"block": Scheme.BLOCK_QUADRATIC, "block-quadratic": Scheme.BLOCK_QUADRATIC,
               "trapezoidal": Scheme.TRAPEZOIDAL, "trapezoid": Scheme.TRAPEZOIDAL}
    if name not in aliases:
        raise ConfigError(f"unknown scheme {name!r}")
    return aliases[name]


def cmd_compare(args) -> int:
    problem = _problem(args)
    t_phys, t = _times(args, problem)
    methods = _names(args.method) + [m for m in _names(args.oracle or "") if m not in _names(args.method)]
    if len(methods) < 2:
        raise ConfigError("compare needs at least two methods")
    curves = method_curves(methods, problem, t, args.n, _opts(args))
    rows = []
    for a, c in itertools.combinations(methods, 2):
        for q, qi in (("g", 0), ("G", 1)):
            va, vc = curves[a][qi], curves[c][qi]
            if va is None or vc is None:
                continue
            scale = problem.rate if q == "g" else 1.0
            diff = np.abs(va - vc)
            for i, tp in enumerate(t_phys):
                rows.append((tp, q, a, c, scale * va[i], scale * vc[i], scale * diff[i]))
            _diag(f"sup |{a} - {c}| for {q}: {scale * float(np.max(diff)):.3e}", "note")
    if "leblanc" in curves:
        sup = float(np.max(curves["leblanc"][1]))
        if sup > 1.0:
            _diag(f"leblanc CDF exceeds 1 (sup = {sup:.6g}; limit exp(b(z-b)) = "
                  f"{closedform.leblanc_cdf_limit(problem.z, problem.b):.6g})", "warning")
    write_csv(args.out, ("t", "quantity", "method_a", "method_b", "value_a", "value_b", "abs_diff"), rows)
    return EXIT_OK


def cmd_asymptotic(args) -> int:
    z = 2.0 if args.z is None else args.z
    bs = np.linspace(args.b_min, args.b_max, args.b_count)
    skipped = [b for b in bs if not b < z]
    bs = [b for b in bs if b < z]
    if skipped:
        _diag(f"skipping barriers at or above the start: {', '.join(fmt(float(b)) for b in skipped)}", "note")
    values = asymptotic_sweep(z, bs, args.t_end, args.step, args.workers)
    write_csv(args.out, ("z", "b", "t", "G"), [(z, float(b), args.t_end, v) for b, v in zip(bs, values)])
    return EXIT_OK


def cmd_expected_time(args) -> int:
    rows = expected_time_surface(_floats(args.z_list), _floats(args.b_list), args.t_max, args.tail_tol, args.workers)
    write_csv(args.out, ("z", "b", "E", "tail_flag"), rows)
    return EXIT_OK


def cmd_mc(args) -> int:
    problem = _problem(args)
    t_phys, t = _times(args, problem)
    cfg = MCConfig(paths=args.paths, dt=args.dt, horizon=float(t.max()), seed=args.seed, workers=args.workers)
    res = mc_hitting_cdf(problem.z, problem.b, cfg, t)
    write_csv(args.out, ("t", "G", "band"), [(tp, G, res.band) for tp, G in zip(t_phys, res.cdf)])
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _common(p, *, problem=True, times=True):
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--out", help="output CSV path (default: standard output)")
    p.add_argument("--workers", type=int, default=1, help="worker processes/threads for sweeps")
    if problem:
        p.add_argument("--z", type=float, help="start (normalized, or raw with --rate/--mean/--sigma)")
        p.add_argument("--b", type=float, help="barrier")
        p.add_argument("--rate", type=float, help="mean-reversion rate (raw-parameter mode)")
        p.add_argument("--mean", type=float, help="long-run mean (raw-parameter mode)")
        p.add_argument("--sigma", type=float, help="volatility (raw-parameter mode)")
    if times:
        p.add_argument("--t-end", type=float, default=2.0, help="last output time")
        p.add_argument("--points", type=int, default=200, help="number of output intervals")
        p.add_argument("--n", type=int, default=500, help="Volterra grid steps (even)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--stehfest-m", type=int, default=8)
        p.add_argument("--digits", type=int, default=40)
        p.add_argument("--paths", type=int, default=20_000, help="Monte Carlo paths")
        p.add_argument("--dt", type=float, default=1e-4, help="Monte Carlo time step")
        p.add_argument("--cn-h", type=float, default=0.005, help="Crank-Nicolson space step")
        p.add_argument("--cn-k", type=float, default=0.005, help="Crank-Nicolson time step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oufpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("density", help="hitting density and CDF on a time grid")
    _common(p)
    p.add_argument("--method", default="backward", help=f"comma list from: {', '.join(METHODS)}")
    p.add_argument("--oracle", help="ignored here; see compare")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("convergence", help="empirical orders on the Abel benchmarks")
    _common(p, problem=False, times=False)
    p.add_argument("--ladder", default=",".join(map(str, DEFAULT_LADDER)))
    p.add_argument("--problem", choices=("forward", "backward", "both"), default="both")
    p.add_argument("--scheme", "--method", dest="scheme", default="block,trapezoidal")
    p.add_argument("--norm", choices=("rms", "max", "mean"), default="rms", help="error norm used for the fit")
    p.add_argument("--end", type=float, default=LADDER_END, help="length of the benchmark interval")
    p.add_argument("--report", help="JSON report path (default: standard error)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("compare", help="pairwise differences between methods")
    _common(p)
    p.add_argument("--method", default="forward,backward")
    p.add_argument("--oracle", default="leblanc,crank-nicolson")
    p.set_defaults(func=cmd_compare, z=2.0, b=0.0)

    p = sub.add_parser("asymptotic", help="G(T, z) across barriers at a long horizon")
    _common(p, problem=False, times=False)
    p.add_argument("--z", type=float, default=2.0)
    p.add_argument("--t-end", type=float, default=500.0)
    p.add_argument("--b-min", type=float, default=-5.0)
    p.add_argument("--b-max", type=float, default=2.0)
    p.add_argument("--b-count", type=int, default=15)
    p.add_argument("--step", type=float, default=0.02, help="time step of the Volterra grid")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("expected-time", help="expected hitting time over a (z, b) grid")
    _common(p, problem=False, times=False)
    p.add_argument("--z-list", default="0.5,1,2,3,4")
    p.add_argument("--b-list", default="-1,-0.5,0,0.5,1")
    p.add_argument("--t-max", type=float, default=50.0)
    p.add_argument("--tail-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_expected_time)

    p = sub.add_parser("mc", help="Monte Carlo empirical CDF")
    _common(p)
    p.set_defaults(func=cmd_mc)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv``, using values from ``--config`` as defaults below explicit flags."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a JSON object")
    values = {k.replace("-", "_"): v for k, v in values.items()}
    unknown = sorted(k for k in values if k not in vars(args) or k in ("func", "command", "config"))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    parser.subcommands[args.command].set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        _diag(str(exc))
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.subcommands[args.command].print_usage(sys.stderr)
        _diag(str(exc))
        return EXIT_CONFIG
    except (SolverBreakdown, PrecisionExhausted, ArithmeticError, FloatingPointError) as exc:
        _diag(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    except (OUFPTError, ValueError) as exc:
        _diag(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
