"""Command-line front end: ``manetcap <command> [flags]``.

Every parameter flag takes one value or a comma-separated list; the command
runs on the cartesian product, one output row per point, rows ordered by the
parameter tuple.  ``--config FILE`` reads ``key = value`` lines using the
flag names without dashes; explicit flags override the file.

Exit status: 0 success, 1 usage error, 2 validation failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .capacity import EmcParams, emc_limiting_distribution, solve_blocking_probability
from .errors import CapacityError, DomainError, SolverError
from .optimizer import optimal_capacity
from .oracle import build_chain, occupancy_marginal, stationary_distribution, total_variation
from .scheduling import (
    GtsGeometry,
    LtsGeometry,
    gts_capacity,
    lts_capacity,
)
from .simulation import SimConfig, run_replications

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2, 3

# Parameter name -> (parser, default).  Order fixes both the sort key and
# the leading CSV columns.
PARAMS = {
    "n": (int, "72"),
    "m": (int, "6"),
    "B": (int, "5"),
    "alpha": (float, "0.5"),
    "scheme": (str, "lts"),
    "nu": (int, "1"),
    "delta": (float, "1.0"),
    "mobility": (str, "iid"),
    "lambda": (float, None),
    "rho": (float, None),
}
RUN_SETTINGS = {
    "slots": (int, "1000000"),
    "warmup": (int, None),
    "seed": (int, "0"),
    "replications": (int, "1"),
    "workers": (int, "1"),
}

COLUMNS = {
    "capacity": ["n", "m", "B", "alpha", "scheme", "nu", "delta",
                 "p_sd", "p_sr", "p_rd", "p_b_saturated", "T_c", "error"],
    "blocking": ["n", "m", "B", "alpha", "scheme", "nu", "delta", "lambda", "rho",
                 "p_b", "mu_s", "saturated", "residual", "error"],
    "optimize": ["n", "m", "B", "scheme", "nu", "delta",
                 "gamma_star", "alpha_star", "T_c_star", "residual", "error"],
    "simulate": ["n", "m", "B", "alpha", "scheme", "nu", "delta", "mobility", "lambda", "rho",
                 "slots", "warmup", "seed", "replications",
                 "throughput", "throughput_ci", "throughput_all", "throughput_all_ci",
                 "empirical_rbp", "empirical_rbp_ci", "mean_local_queue",
                 "mean_relay_occupancy", "tx_S-D", "tx_S-R", "tx_R-D",
                 "T_c", "expected_throughput", "expected_rbp", "rel_error", "rbp_rel_error",
                 "error"],
    "validate": ["check", "params", "measured", "reference", "deviation", "tolerance",
                 "passed"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(path: str) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key == "lam":
            key = "lambda"
        if key not in PARAMS and key not in RUN_SETTINGS and key not in ("axis", "format", "out", "target"):
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "axis":
            out.setdefault("axis", []).append(value)
        else:
            out[key] = value
    return out


def _values(name, text, parser):
    items = [s.strip() for s in str(text).split(",") if s.strip()]
    if not items:
        raise UsageError(f"empty value list for {name}")
    try:
        return [parser(s) for s in items]
    except ValueError as exc:
        raise UsageError(f"bad value for {name}: {text!r}") from exc


@dataclass
class Spec:
    command: str
    grid: dict
    settings: dict
    fmt: str
    out: str | None
    target: str | None = None


def build_spec(args) -> Spec:
    config = load_config(args.config) if args.config else {}

    def pick(name, table):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in config:
            return config[name]
        return table[name][1]

    grid = {}
    for name, (parser, _) in PARAMS.items():
        raw = pick(name, PARAMS)
        grid[name] = None if raw is None else _values(name, raw, parser)

    axes = list(getattr(args, "axis", None) or []) or config.get("axis", [])
    if args.command == "sweep" and not axes:
        raise UsageError("sweep needs at least one --axis name=v1,v2,...")
    for axis in axes:
        if "=" not in axis:
            raise UsageError(f"axis {axis!r} must look like name=v1,v2")
        name, values = axis.split("=", 1)
        name = name.strip()
        if name == "lam":
            name = "lambda"
        if name not in PARAMS:
            raise UsageError(f"unknown sweep parameter {name!r}")
        grid[name] = _values(name, values, PARAMS[name][0])

    if grid["lambda"] is not None and grid["rho"] is not None:
        raise UsageError("give either --lambda or --rho, not both")
    for scheme in grid["scheme"]:
        if scheme not in ("lts", "gts"):
            raise UsageError(f"scheme must be lts or gts, not {scheme!r}")
    for mobility in grid["mobility"]:
        if mobility not in ("iid", "rw"):
            raise UsageError(f"mobility must be iid or rw, not {mobility!r}")

    settings = {}
    for name, (parser, _) in RUN_SETTINGS.items():
        raw = pick(name, RUN_SETTINGS)
        try:
            settings[name] = None if raw is None else parser(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {name}: {raw!r}") from exc

    fmt = args.format or config.get("format", "csv")
    if fmt not in ("csv", "jsonl"):
        raise UsageError("format must be csv or jsonl")
    target = getattr(args, "target", None) or config.get("target")
    return Spec(args.command, grid, settings, fmt, args.out or config.get("out"), target)


# ---------------------------------------------------------------- row makers

def _geometry(p):
    if p["scheme"] == "lts":
        return LtsGeometry(p["n"], p["m"])
    return GtsGeometry(p["n"], p["m"], p["nu"], p["delta"])


def _capacity(p):
    geom = _geometry(p)
    fn = lts_capacity if p["scheme"] == "lts" else gts_capacity
    return fn(geom, p["B"], p["alpha"])


def _points(grid, names):
    axes = [grid[k] if grid[k] is not None else [None] for k in names]
    combos = sorted(itertools.product(*axes), key=lambda t: tuple((v is None, v) for v in t))
    return [dict(zip(names, c)) for c in combos]


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}"


def rows_capacity(spec):
    for p in _points(spec.grid, ["n", "m", "B", "alpha", "scheme", "nu", "delta"]):
        row = dict(p)
        try:
            res = _capacity(p)
            row.update(p_sd=res.probs.p_sd, p_sr=res.probs.p_sr, p_rd=res.probs.p_rd,
                       p_b_saturated=res.p_b_saturated, T_c=res.t_c)
        except (DomainError, SolverError) as exc:
            row["error"] = _error_text(exc)
        yield row


def _load(p, t_c):
    """Resolve (lambda, rho) for a point given its capacity."""
    if p.get("lambda") is not None:
        lam = p["lambda"]
        return lam, lam / t_c if t_c > 0 else math.inf
    if p.get("rho") is not None:
        return p["rho"] * t_c, p["rho"]
    raise DomainError("need --lambda or --rho")


def rows_blocking(spec):
    names = ["n", "m", "B", "alpha", "scheme", "nu", "delta", "lambda", "rho"]
    for p in _points(spec.grid, names):
        row = {k: p[k] for k in names if k not in ("lambda", "rho")}
        try:
            res = _capacity(p)
            lam, rho = _load(p, res.t_c)
            row.update({"lambda": lam, "rho": rho})
            sol = solve_blocking_probability(lam, res.probs, p["n"], p["B"])
            row.update(p_b=sol.p_b, mu_s=sol.mu_s, saturated=int(sol.saturated),
                       residual=sol.residual)
        except (DomainError, SolverError) as exc:
            row.setdefault("lambda", p["lambda"])
            row.setdefault("rho", p["rho"])
            row["error"] = _error_text(exc)
        yield row


def rows_optimize(spec):
    for p in _points(spec.grid, ["n", "m", "B", "scheme", "nu", "delta"]):
        row = dict(p)
        try:
            res = optimal_capacity(p["scheme"], _geometry(p), p["B"])
            row.update(gamma_star=res.gamma_star, alpha_star=res.alpha_star,
                       T_c_star=res.t_c_star, residual=res.residual)
        except (DomainError, SolverError) as exc:
            row["error"] = _error_text(exc)
        yield row


def _simulate_point(p, settings):
    res = _capacity(p)
    lam, rho = _load(p, res.t_c)
    row = {k: p[k] for k in ("n", "m", "B", "alpha", "scheme", "nu", "delta", "mobility")}
    row.update({"lambda": lam, "rho": rho})
    cfg = SimConfig(
        n=p["n"], m=p["m"], B=p["B"], alpha=p["alpha"], lam=lam, scheme=p["scheme"],
        mobility=p["mobility"], nu=p["nu"], delta=p["delta"], slots=settings["slots"],
        warmup=settings["warmup"], seed=settings["seed"],
    )
    summary = run_replications(cfg, settings["replications"], workers=settings["workers"])
    expected = min(lam, res.t_c)
    sol = solve_blocking_probability(lam, res.probs, p["n"], p["B"])
    tx = {lab: sum(r.tx_counts[lab] for r in summary.runs) for lab in ("S-D", "S-R", "R-D")}
    mean, half = summary.mean, summary.half_width
    row.update(
        slots=cfg.slots, warmup=cfg.warmup_slots, seed=cfg.seed,
        replications=settings["replications"],
        throughput=mean["throughput"], throughput_ci=half["throughput"],
        throughput_all=mean["throughput_all"], throughput_all_ci=half["throughput_all"],
        empirical_rbp=mean["empirical_rbp"], empirical_rbp_ci=half["empirical_rbp"],
        mean_local_queue=mean["mean_local_queue"],
        mean_relay_occupancy=mean["mean_relay_occupancy"],
        T_c=res.t_c, expected_throughput=expected, expected_rbp=sol.p_b,
        rel_error=_rel(mean["throughput_all"], expected),
        rbp_rel_error=_rel(mean["empirical_rbp"], sol.p_b),
    )
    row.update({f"tx_{k}": v for k, v in tx.items()})
    return row


def _rel(x, ref):
    if ref == 0:
        return 0.0 if x == 0 else math.inf
    return x / ref - 1.0


def rows_simulate(spec):
    names = ["n", "m", "B", "alpha", "scheme", "nu", "delta", "mobility", "lambda", "rho"]
    for p in _points(spec.grid, names):
        try:
            yield _simulate_point(p, spec.settings)
        except (DomainError, SolverError) as exc:
            row = {k: p[k] for k in names}
            row["error"] = _error_text(exc)
            yield row


# Validation thresholds.
ORACLE_TV = 1e-9
SIM_REL = 0.03


def rows_validate(spec, with_sim=True):
    for n, B, beta, rho_s in itertools.product((4, 5, 6), (1, 2, 3), (0.5, 1.0, 2.0), (0.5, 1.0)):
        label = f"n={n} B={B} beta={beta} rho_s={rho_s}"
        p_rd = 0.2
        a = beta * rho_s * p_rd
        try:
            chain = build_chain(n, B, a, p_rd)
            marg = occupancy_marginal(chain, stationary_distribution(chain))
            emc = emc_limiting_distribution(EmcParams(n, B, beta, rho_s))
            tv = total_variation(marg, emc.pi)
            yield _check("oracle_tv", label, tv, 0.0, tv, ORACLE_TV)
            dev = abs(marg[-1] - emc.blocking)
            yield _check("oracle_blocking", label, marg[-1], emc.blocking, dev, ORACLE_TV)
        except (SolverError, CapacityError, DomainError) as exc:
            yield {"check": "oracle_tv", "params": label, "measured": _error_text(exc),
                   "passed": 0}
    if not with_sim:
        return
    cases = [
        dict(n=72, m=6, B=5, alpha=0.5, scheme="lts", nu=1, delta=1.0, mobility="iid"),
        dict(n=200, m=10, B=8, alpha=0.3, scheme="gts", nu=1, delta=1.0, mobility="iid"),
    ]
    for case in cases:
        case["rho"] = 1.5
        label = " ".join(f"{k}={case[k]}" for k in ("scheme", "n", "m", "B", "alpha")) + " rho=1.5"
        row = _simulate_point(case, spec.settings)
        yield _check("sim_throughput", label, row["throughput_all"], row["expected_throughput"],
                     abs(row["rel_error"]), SIM_REL)
        if case["scheme"] == "lts":
            yield _check("sim_rbp", label, row["empirical_rbp"], row["expected_rbp"],
                         abs(row["rbp_rel_error"]), SIM_REL)


def _check(name, label, measured, reference, deviation, tolerance):
    return {"check": name, "params": label, "measured": measured, "reference": reference,
            "deviation": deviation, "tolerance": tolerance, "passed": int(deviation <= tolerance)}


# ---------------------------------------------------------------- output

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_rows(rows, columns, fmt, stream):
    if fmt == "csv":
        writer = csv.DictWriter(stream, fieldnames=columns, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
            stream.flush()
    else:
        for row in rows:
            rec = {}
            for k in columns:
                v = _cell(row.get(k))
                if isinstance(v, float) and not math.isfinite(v):
                    v = None
                rec[k] = v
            stream.write(json.dumps(rec) + "\n")
            stream.flush()


def _add_params(p, sweep=False):
    for name in PARAMS:
        flag = "--lambda" if name == "lambda" else f"--{name}"
        p.add_argument(flag, dest=name, default=None,
                       help="value or comma-separated list" if not sweep else argparse.SUPPRESS)
    for name in RUN_SETTINGS:
        p.add_argument(f"--{name}", dest=name, default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", default=None, choices=["csv", "jsonl"])
    p.add_argument("--config", default=None, help="key = value file; flags override it")


def make_parser():
    parser = _Parser(prog="manetcap", description="Capacity analysis and simulation of "
                     "buffer-limited two-hop relay MANETs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("capacity", "throughput capacity table"),
        ("blocking", "relay blocking probability versus arrival rate"),
        ("optimize", "optimal transmission ratio"),
        ("simulate", "Monte Carlo simulation with analytic reference columns"),
    ]:
        _add_params(sub.add_parser(name, help=text))
    sweep = sub.add_parser("sweep", help="cross parameter axes for a target command")
    _add_params(sweep)
    sweep.add_argument("--axis", action="append", help="name=v1,v2,... (repeatable)")
    sweep.add_argument("--target", choices=["capacity", "blocking", "optimize", "simulate"],
                       default=None)
    val = sub.add_parser("validate", help="oracle and simulation checks; exit 2 on failure")
    _add_params(val)
    val.add_argument("--no-sim", action="store_true", help="skip the simulation checks")
    return parser


ROWS = {"capacity": rows_capacity, "blocking": rows_blocking, "optimize": rows_optimize,
        "simulate": rows_simulate}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        spec = build_spec(args)
    except UsageError as exc:
        print(f"manetcap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if spec.command == "validate":
        columns = COLUMNS["validate"]
        rows = rows_validate(spec, with_sim=not args.no_sim)
    else:
        target = (spec.target or "capacity") if spec.command == "sweep" else spec.command
        if target == "blocking" and spec.grid["lambda"] is None and spec.grid["rho"] is None:
            print("manetcap: error: blocking needs --lambda or --rho", file=sys.stderr)
            return EXIT_USAGE
        if target == "simulate" and spec.grid["lambda"] is None and spec.grid["rho"] is None:
            spec.grid["rho"] = [1.5]
        columns = COLUMNS[target]
        rows = ROWS[target](spec)

    collected = []

    def tee(it):
        for row in it:
            collected.append(row)
            yield row

    stream = open(spec.out, "w", newline="") if spec.out else sys.stdout
    try:
        write_rows(tee(rows), columns, spec.fmt, stream)
    except (DomainError, SolverError, CapacityError) as exc:
        print(f"manetcap: error: {_error_text(exc)}", file=sys.stderr)
        return EXIT_SOLVER if isinstance(exc, SolverError) else EXIT_USAGE
    finally:
        if spec.out:
            stream.close()

    errors = [r.get("error") or "" for r in collected]
    if any(e.startswith("SolverError") for e in errors):
        return EXIT_SOLVER
    if spec.command == "validate" and not all(r.get("passed") for r in collected):
        return EXIT_VALIDATION
    if any(errors):
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
