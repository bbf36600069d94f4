"""Power-law fit of iterations against n (or m) for one start and algorithm.

    python scripts/fit_exponent.py --init fv --class feasible --seeds 10
"""
import argparse

from ellipfeas import harness as hs


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--init", default="fv")
    ap.add_argument("--alg", default="sea")
    ap.add_argument("--class", dest="cls", default="feasible")
    ap.add_argument("--grid", default="desk")
    ap.add_argument("--predictor", choices=("n", "m"), default="n")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    recs = hs.run_suite(hs.parse_grid(args.grid), (args.init,), (args.alg,), range(args.seeds),
                        classes=(args.cls,), jobs=args.jobs)
    print(hs.format_table(hs.aggregate(recs)))
    c, k = hs.fit_power_law(recs, args.predictor)
    print(f"iterations ~ {c:.3g} * {args.predictor}^{k:.3f}")


if __name__ == "__main__":
    main()
