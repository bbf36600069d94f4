"""Track the width potential psi along OEA runs on instances with a known condition value.

Every step on a row whose semi-width is at least tau should shrink ln psi by
at least 1/(2(m+1)); the script prints the tightest margin seen.

    python scripts/potential_law.py --n 5 --m 10,20 --seeds 6
"""
import argparse

from ellipfeas import diagnostics as dg
from ellipfeas import initialization as ini
from ellipfeas import solver as sv
from ellipfeas.generators import generate_constructed


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--m", default="10,20")
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--init", default="bigm")
    args = ap.parse_args()
    for m in map(int, args.m.split(",")):
        for feasible in (True, False):
            steps, margin = 0, float("inf")
            for seed in range(args.seeds):
                pl = generate_constructed(args.n, m, args.tau, feasible, seed)
                pre = {}

                def cb(event, st, j, dep):
                    nonlocal steps, margin
                    if event == "pre":
                        pre.clear()
                        if st.f > 0 and dg.semi_widths(st)[j] >= pl.tau:
                            pre["v"] = dg.log_psi(st, pl.tau)
                    elif event == "post" and "v" in pre and st.f > 0:
                        change = dg.log_psi(st, pl.tau) - pre.pop("v")
                        margin = min(margin, -change - 1.0 / (2 * (st.m + 1)))
                        steps += 1

                out = ini.solve(pl.P, args.init, sv.SolverConfig(algorithm="oea"), callback=cb)
                assert out.status.value == ("feasible" if feasible else "infeasible"), out.status
            kind = "feasible" if feasible else "infeasible"
            print(f"m={m} {kind}: {steps} wide steps, smallest margin {margin:.3e}")


if __name__ == "__main__":
    main()
