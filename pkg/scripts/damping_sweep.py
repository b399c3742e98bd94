"""Metrics versus damping for AMP and VAMP on synthetic stereo instances.

    python scripts/damping_sweep.py --instances 10 --out damping.csv
"""

import argparse

from ampsep.denoisers import BgPrior
from ampsep.harness import THETA_GRID, SyntheticSpec, metric_curve, rows_to_csv, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--rho", type=float, default=0.6)
    ap.add_argument("--sigma2", type=float, default=5.0)
    ap.add_argument("--amp-iters", type=int, default=30)
    ap.add_argument("--vamp-iters", type=int, default=10)
    ap.add_argument("--out", help="CSV output path")
    args = ap.parse_args()

    spec = SyntheticSpec(prior=BgPrior(args.rho, 0.0, args.sigma2), num_instances=args.instances, seed=args.seed)
    rows = sweep(spec, "amp", THETA_GRID, (args.amp_iters,)) + sweep(spec, "vamp", THETA_GRID, (args.vamp_iters,))
    if args.out:
        rows_to_csv(rows, args.out)

    print(f"{'theta':>6}" + "".join(f"{a + ' ' + m:>11}" for a in ("amp", "vamp") for m in ("sdr", "sir", "sar")))
    curves = {(a, m): metric_curve([r for r in rows if r.algo == a], m, "theta")[1]
              for a in ("amp", "vamp") for m in ("sdr", "sir", "sar")}
    for i, theta in enumerate(sorted(THETA_GRID)):
        print(f"{theta:>6.2f}" + "".join(f"{curves[k][i]:>11.2f}" for k in curves))


if __name__ == "__main__":
    main()
