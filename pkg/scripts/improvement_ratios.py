"""Geometric-mean iteration ratios of the SEA ablations on one grid.

old-bound / best-bound measures the gain from the sharper lower bounds;
no-decrease / with-decrease the gain from decrease and drop steps.

    python scripts/improvement_ratios.py --n 60 --seeds 5
"""
import argparse

from ellipfeas import harness as hs


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--init", default="bigm")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    recs = hs.run_suite(hs.grid_cells([args.n]), (args.init,), ("sea", "sea-oldlb", "sea-nodec"),
                        range(args.seeds), jobs=args.jobs)
    print(hs.format_table(hs.aggregate(recs)))
    print(f"old-bound / best-bound:       {hs.geometric_mean_ratio(recs, 'sea-oldlb', 'sea'):.3f}  (reference 1.20)")
    print(f"no-decrease / with-decrease:  {hs.geometric_mean_ratio(recs, 'sea-nodec', 'sea'):.3f}  (reference 1.93)")


if __name__ == "__main__":
    main()
