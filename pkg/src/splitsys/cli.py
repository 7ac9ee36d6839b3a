"""Command line front end: ``splitsys generate | solve | verify | bench``.

Exit codes: 0 solved / all checks passed, 1 failed verification, 2 usage or
configuration error, 3 iteration cap reached, 4 linesearch failure, 5 I/O error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checks
from .errors import ConfigurationError, InvariantViolation, OracleFailure
from .harness import (STRUCTURES, acceptance_suite, evaluate_run, generate_planted_system, load_instance,
                      oracle_solve, plant_residual, save_instance, save_metrics)
from .solver import AlgoParams, solve, solve_baseline_fb

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_MAXITER, EXIT_LINESEARCH, EXIT_IO = 0, 1, 2, 3, 4, 5
STATUS_EXIT = {"solved": EXIT_OK, "max_iterations": EXIT_MAXITER, "linesearch_failure": EXIT_LINESEARCH}


class UsageError(Exception):
    pass


def _seed(args):
    env = os.environ.get("SPLITSYS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SPLITSYS_SEED must be an integer, got {env!r}") from None
    return args.seed


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_instance_args(p):
    p.add_argument("--instance", type=Path, help="instance JSON file")
    p.add_argument("--n", type=_positive_int, default=2, help="dimension when generating")
    p.add_argument("--m", type=_positive_int, default=2, help="number of components when generating")
    p.add_argument("--structure", choices=STRUCTURES, default="affine_vi")
    p.add_argument("--seed", type=int, default=0)


def _add_param_args(p):
    d = AlgoParams()
    p.add_argument("--beta-lo", type=float, default=d.beta_lo)
    p.add_argument("--beta-hi", type=float, default=d.beta_hi)
    p.add_argument("--beta", default=None,
                   help="'midpoint' (default), 'geometric', or a constant value")
    p.add_argument("--theta", type=float, default=d.theta)
    p.add_argument("--delta", type=float, default=d.delta)
    p.add_argument("--radius", type=float, default=None, help="selection radius R (default: instance)")
    p.add_argument("--tol", type=float, default=d.tol_outer, help="outer residual tolerance")
    p.add_argument("--tol-inner", type=float, default=d.tol_component)
    p.add_argument("--max-outer", type=int, default=d.max_outer)
    p.add_argument("--max-ls", type=int, default=d.max_linesearch)


def params_from_args(args):
    schedule = args.beta or "midpoint"
    if schedule not in ("midpoint", "geometric"):
        try:
            schedule = float(schedule)
        except ValueError:
            raise ConfigurationError(f"--beta must be midpoint, geometric or a number, got {schedule!r}") from None
    return AlgoParams(beta_lo=args.beta_lo, beta_hi=args.beta_hi, beta_schedule=schedule,
                      theta=args.theta, delta=args.delta, radius=args.radius,
                      tol_component=args.tol_inner, tol_outer=args.tol,
                      max_outer=args.max_outer, max_linesearch=args.max_ls)


def params_hash(params):
    d = dict(params.__dict__)
    d["beta_schedule"] = params.schedule_label()
    return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:10]


def instance_from_args(args, check=True):
    if args.instance is not None:
        return load_instance(args.instance, check=check)
    return generate_planted_system(args.n, args.m, _seed(args), args.structure)


def cmd_generate(args):
    inst = generate_planted_system(args.n, args.m, _seed(args), args.structure)
    save_instance(inst, args.out)
    r = plant_residual(inst, AlgoParams().beta_mid)
    print(f"wrote {args.out} ({inst.name})")
    print(f"planted solution residual: {r:.3e}")
    return EXIT_OK


def cmd_solve(args):
    params = params_from_args(args)
    inst = instance_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = solve(inst, params, verify=args.verify)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    metrics = evaluate_run(res.trace, inst, res.status, res.reason)
    res.trace.to_csv(out / "trace.csv")
    save_metrics(metrics, out / "metrics.json")
    print(f"status: {res.status} ({res.reason}) after {res.iterations} iterations")
    print(f"final residual: {metrics.final_residual:.3e}")
    if inst.known_solution is not None:
        print(f"distance to known solution: {np.linalg.norm(res.x - inst.known_solution):.3e}")
    if res.error is not None:
        print(f"error: {res.error}", file=sys.stderr)
    return STATUS_EXIT[res.status]


def cmd_verify(args):
    params = params_from_args(args)
    inst = instance_from_args(args, check=not args.allow_unchecked)
    rng = np.random.default_rng(_seed(args))
    results = checks.property_suite(inst, rng, pairs=args.pairs, params=params)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(json.dumps({"check": failed[0].name, "counterexample": failed[0].witness}))
        return EXIT_VERIFY
    if args.solve_iters > 0:
        short = AlgoParams(**{**params.__dict__, "max_outer": args.solve_iters})
        try:
            res = solve(inst, short, verify=True)
        except InvariantViolation as exc:
            print(f"[FAIL] short solve with run-time checks: {exc}")
            return EXIT_VERIFY
        if res.status == "linesearch_failure":
            print(f"[FAIL] short solve: {res.error}")
            return EXIT_VERIFY
        print(f"[PASS] short solve with run-time checks: {len(res.trace) - 1} iterations, status {res.status}")
    return EXIT_OK


def _bench_cell(inst, params, check_oracle):
    rows = []
    base = {"instance": inst.name, "params_hash": params_hash(params)}
    if check_oracle:
        try:
            oracle_solve(inst)
        except OracleFailure:
            return [{**base, "solver": "hybrid", "status": "excluded", "iterations": "",
                     "residual": "", "time_ms": ""}]
    res = solve(inst, params)
    rows.append({**base, "solver": "hybrid", "status": res.status, "iterations": res.iterations,
                 "residual": repr(res.trace.residuals[-1]), "time_ms": f"{res.trace.time_ms[-1]:.3f}"})
    if inst.m == 1:
        A, _ = inst.components[0]
        step = 1.0 / max(getattr(A, "lipschitz", 1.0), 1e-12)
        b = solve_baseline_fb(inst, step, max_iter=params.max_outer, tol=params.tol_outer)
        rows.append({**base, "solver": "baseline_fb", "status": b.status, "iterations": b.iterations,
                     "residual": repr(b.trace.residuals[-1]), "time_ms": f"{b.trace.time_ms[-1]:.3f}"})
    return rows


def cmd_bench(args):
    params = params_from_args(args)
    if args.suite == ["default"]:
        suite = acceptance_suite()
    else:
        suite = [load_instance(p) for p in args.suite]
    if not suite:
        raise UsageError("empty suite")
    rows = []
    for inst in suite:
        rows += _bench_cell(inst, params, not args.no_oracle)
    rows.sort(key=lambda r: (r["instance"], r["solver"]))
    cols = ["instance", "solver", "params_hash", "status", "iterations", "residual", "time_ms"]
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out != "-" else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    hybrid = [r for r in rows if r["solver"] == "hybrid"]
    return EXIT_OK if any(r["status"] == "solved" for r in hybrid) else EXIT_MAXITER


def build_parser():
    parser = argparse.ArgumentParser(prog="splitsys", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a planted-solution instance")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--structure", choices=STRUCTURES, default="affine_vi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run the hybrid solver, write trace.csv and metrics.json")
    _add_instance_args(p)
    _add_param_args(p)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--verify", action="store_true", help="check convergence invariants every iteration")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="sampled operator/geometry checks plus a checked short solve")
    _add_instance_args(p)
    _add_param_args(p)
    p.add_argument("--pairs", type=_positive_int, default=1000)
    p.add_argument("--solve-iters", type=int, default=200)
    p.add_argument("--allow-unchecked", action="store_true",
                   help="load affine maps without the monotonicity check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a suite and emit one CSV row per cell")
    p.add_argument("--suite", nargs="*", default=["default"],
                   help="'default' or instance JSON files")
    p.add_argument("--out", default="-")
    p.add_argument("--no-oracle", action="store_true", help="skip the oracle admission check")
    _add_param_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"splitsys: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"splitsys: I/O error: {exc!r}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
