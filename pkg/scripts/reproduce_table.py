"""Mean iteration counts over an (n, m) grid for each start and algorithm.

    python scripts/reproduce_table.py --grid 60x84 --seeds 10
    python scripts/reproduce_table.py --grid desk --inits bigm,fv,twophase --algs sea,oea
"""
import argparse
from pathlib import Path

from ellipfeas import harness as hs

# published means for the n = 60, m = 84 cell (big-M start, standard algorithm)
REFERENCE = {(60, 84): {"bigm/sea/feas": 223.4, "bigm/sea/infeas": 293.4}}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--grid", default="60x84")
    ap.add_argument("--inits", default="bigm")
    ap.add_argument("--algs", default="sea")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None, help="optional CSV of every run")
    args = ap.parse_args()
    recs = hs.run_suite(hs.parse_grid(args.grid), args.inits.split(","), args.algs.split(","),
                        range(args.seeds), args.out, jobs=args.jobs)
    rows = hs.aggregate(recs)
    print(hs.format_table(rows))
    for row in rows:
        for col, ref in REFERENCE.get((row["n"], row["m"]), {}).items():
            if col in row:
                print(f"n={row['n']} m={row['m']} {col}: {row[col]:.1f} vs reference {ref} "
                      f"(ratio {row[col] / ref:.2f})")
    bad = [r for r in recs if r.status not in ("feasible", "infeasible")]
    if bad:
        print(f"{len(bad)} runs ended otherwise: " + ", ".join(sorted({r.status for r in bad})))


if __name__ == "__main__":
    main()
