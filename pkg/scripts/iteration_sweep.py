"""Metrics versus the iteration cap for undamped AMP and VAMP.

    python scripts/iteration_sweep.py --max-iters 5 10 20 50 100 200
"""

import argparse

from ampsep.denoisers import BgPrior
from ampsep.harness import MAX_ITER_GRID, SyntheticSpec, rows_to_csv, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--rho", type=float, default=0.6)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--max-iters", type=int, nargs="+", default=list(MAX_ITER_GRID))
    ap.add_argument("--out")
    args = ap.parse_args()

    spec = SyntheticSpec(prior=BgPrior(args.rho, 0.0, 5.0), num_instances=args.instances, seed=args.seed)
    rows = []
    for algo in ("amp", "vamp"):
        rows += sweep(spec, algo, (args.theta,), args.max_iters)
    if args.out:
        rows_to_csv(rows, args.out)
    for algo in ("amp", "vamp"):
        print(algo)
        for r in rows:
            if r.algo == algo and r.metric == "sdr":
                sar = next(q.mean for q in rows if q.algo == algo and q.metric == "sar" and q.max_iter == r.max_iter)
                print(f"  max_iter {r.max_iter:>4}  sdr {r.mean:6.2f}  sar {sar:6.2f}  failures {r.failures}")


if __name__ == "__main__":
    main()
