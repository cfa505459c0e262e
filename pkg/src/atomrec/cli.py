"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 infeasible or refused
experiment, 4 solver failure budget exceeded.
"""

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, InfeasibleError, RefusedError, SolverBudgetError
from .experiments import emit, load_config, run_experiment
from .io import format_float, parse_array, parse_set_spec, read_matrix_csv
from .nsp import check_plain_nsp, robust_params, stable_rho, strong_constant
from .random_measure import gaussian_width
from .solvers import MeasurementOperator, SolverOptions, solve_min_atomic

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_BUDGET = 0, 2, 3, 4


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def _operator(args, d):
    if args.A:
        return MeasurementOperator(read_matrix_csv(args.A))
    if args.null:
        return MeasurementOperator.from_null_space(np.atleast_2d(parse_array(args.null)).T)
    raise ConfigError("give the operator with --A FILE or --null ROWS")


def cmd_norm(args):
    aset = parse_set_spec(args.set)
    z = aset.coerce(parse_array(args.z))
    print(format_float(aset.norm(z)))


def cmd_tail(args):
    aset = parse_set_spec(args.set)
    res = aset.tail(aset.coerce(parse_array(args.z)), args.s)
    _print_json({"tail": res.value, "exact": res.exact, "approx": res.approx.ravel().tolist()})


def cmd_solve(args):
    aset = parse_set_spec(args.set)
    A = _operator(args, aset.ambient_dim)
    y = np.ravel(parse_array(args.y))
    res = solve_min_atomic(aset, A, y, SolverOptions(eps=args.eps, max_iter=args.max_iter))
    rep = res.to_report()
    rep["z_hat"] = res.z_hat.ravel().tolist()
    _print_json(rep)
    return EXIT_OK if res.converged else EXIT_BUDGET


def cmd_certify(args):
    aset = parse_set_spec(args.set)
    A = _operator(args, aset.ambient_dim)
    if args.kind == "plain":
        cert = check_plain_nsp(aset, A, args.s, seed=args.seed)
    elif args.kind == "stable":
        cert = stable_rho(aset, A, args.s, seed=args.seed)
    elif args.kind == "strong":
        cert = strong_constant(aset, A, args.s, seed=args.seed)
    else:
        cert = robust_params(aset, A, args.s, args.rho_target, seed=args.seed)
    _print_json(cert.to_dict())


def cmd_width(args):
    aset = parse_set_spec(args.set)
    w = gaussian_width(aset, args.rho, args.s, samples=args.samples, seed=args.seed)
    _print_json({"mean": w.mean, "stderr": w.stderr, "samples": w.samples, "status": w.status})


def cmd_experiment(kind):
    def run(args):
        overrides = {
            "kind": kind, "atoms": args.set, "s": args.s, "m": args.m, "eps": args.eps,
            "trials": args.trials, "seed": args.seed, "out": args.out, "workers": args.workers,
        }
        cfg = load_config(args.config, overrides)
        res = run_experiment(cfg)
        out = cfg.out or f"{kind}_results"
        files = emit(res, out, args.format, config=cfg)
        for f in files:
            print(f)
        return EXIT_REFUSED if res.refused else EXIT_OK
    return run


def build_parser():
    p = argparse.ArgumentParser(prog="atomrec", description="Atomic-norm recovery toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add_set(sp, required=True):
        sp.add_argument("--set", required=required,
                        help="atomic set: canonical:D, rank1:N1xN2, frame:ringK or frame:PATH")

    sp = sub.add_parser("norm", help="atomic norm of a signal")
    add_set(sp)
    sp.add_argument("--z", required=True, help="signal: '3,-4', '3,0;0,1' or a CSV path")
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("tail", help="best s-term approximation error")
    add_set(sp)
    sp.add_argument("--z", required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.set_defaults(func=cmd_tail)

    sp = sub.add_parser("solve", help="minimise the atomic norm subject to the measurements")
    add_set(sp)
    sp.add_argument("--A", help="measurement matrix CSV")
    sp.add_argument("--null", help="rows spanning the null space (alternative to --A)")
    sp.add_argument("--y", required=True)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("certify", help="null space property certificate")
    add_set(sp)
    sp.add_argument("--A")
    sp.add_argument("--null")
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--kind", choices=["plain", "stable", "robust", "strong"], default="stable")
    sp.add_argument("--rho-target", type=float, default=0.75)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("width", help="Monte Carlo Gaussian width of S_rho (rho=0: sphere)")
    add_set(sp)
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--rho", type=float, default=0.0)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_width)

    for name, kind in (("phase", "phase"), ("verify-bounds", "verify"), ("min-measure", "min_measure"),
                       ("mendelson", "mendelson")):
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="key-value config file")
        add_set(sp, required=False)
        sp.add_argument("--s", help="sparsity grid, e.g. 1:6 or 1,2,3")
        sp.add_argument("--m", help="measurement grid, e.g. 2:32:2")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.set_defaults(func=cmd_experiment(kind))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, RefusedError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except SolverBudgetError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
