"""Command line entry point: ``ellipfeas {solve,gen,suite,fit}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness as hs
from . import initialization as ini
from . import solver as sv
from .errors import EllipfeasError
from .generators import GenSpec, generate
from .problem import Status, read_problem, write_problem, write_vector


def _solve(args) -> int:
    if args.problem == "-":
        P = read_problem(sys.stdin)
    else:
        with open(args.problem) as fh:
            P = read_problem(fh)
    overrides = dict(max_iter=args.max_iter, rng_seed=args.seed, record_trace=args.trace is not None)
    if args.M is not None:
        overrides["M"] = args.M
    cfg = hs.algorithm_config(args.alg, **overrides)
    try:
        out = ini.solve(P, args.init, cfg)
    except EllipfeasError as exc:
        print(f"status: {Status.NUMERICAL_FAILURE.value}\nmessage: {exc}")
        return Status.NUMERICAL_FAILURE.exit_code
    print(f"status: {out.status.value}")
    print(f"iterations: {out.stats.iterations}")
    if out.message:
        print(f"message: {out.message}")
    if out.y is not None:
        print("y:")
        write_vector(out.y, sys.stdout)
    elif out.certificate is not None:
        print(f"certificate ({out.certificate.kind.value}):")
        write_vector(out.certificate.x, sys.stdout)
    if args.trace is not None:
        with open(args.trace, "w") as fh:
            sv.write_trace(out.trace, fh)
    return out.status.exit_code


def _gen(args) -> int:
    P, planted = generate(GenSpec(args.n, args.m, args.cls, args.seed))
    with open(args.out, "w") as fh:
        write_problem(P, fh)
    with open(str(args.out) + ".planted", "w") as fh:
        write_vector(planted, fh)
    return 0


def _suite(args) -> int:
    cells = hs.parse_grid(args.grid)
    if args.large:
        cells += hs.grid_cells(hs.LARGE_N)
    progress = None
    if args.verbose:
        progress = lambda r: print(f"{r.cls} n={r.n} m={r.m} seed={r.seed} {r.init}/{r.alg}: "
                                   f"{r.status} {r.iterations}", file=sys.stderr)
    recs = hs.run_suite(cells, args.inits.split(","), args.algs.split(","), range(args.seeds),
                        Path(args.out), deterministic=args.deterministic, jobs=args.jobs,
                        max_iter=args.max_iter, progress=progress)
    print(hs.format_table(hs.aggregate(recs)))
    return 0


def _fit(args) -> int:
    recs = hs.read_records(Path(args.inp))
    if args.cls:
        recs = [r for r in recs if r.cls == args.cls]
    if args.init:
        recs = [r for r in recs if r.init == args.init]
    if args.alg:
        recs = [r for r in recs if r.alg == args.alg]
    try:
        c, k = hs.fit_power_law(recs, args.predictor)
    except EllipfeasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"iterations ~ {c:.4g} * {args.predictor}^{k:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ellipfeas", description="Ellipsoid methods for linear feasibility.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve A^T y <= u read from a file ('-' for stdin)")
    p.add_argument("problem")
    p.add_argument("--init", choices=hs.INITS, default="bigm")
    p.add_argument("--alg", choices=hs.ALGS, default="sea")
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write the per-iteration trace as CSV")
    p.set_defaults(func=_solve)

    p = sub.add_parser("gen", help="write a random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--class", dest="cls", choices=("feasible", "infeasible"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen)

    p = sub.add_parser("suite", help="run a grid of instances and write a CSV")
    p.add_argument("--grid", default="desk", help="'desk', 'full' or NxM pairs, comma separated")
    p.add_argument("--large", action="store_true", help="add the n = 250, 500 cells")
    p.add_argument("--inits", default="bigm")
    p.add_argument("--algs", default="sea")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", help="record runtime as 0 for byte-stable output")
    p.add_argument("--out", default="results.csv")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_suite)

    p = sub.add_parser("fit", help="fit iterations = c * predictor^k")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--predictor", choices=("n", "m"), default="m")
    p.add_argument("--class", dest="cls", default=None)
    p.add_argument("--init", default=None)
    p.add_argument("--alg", default=None)
    p.set_defaults(func=_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
