"""Extrapolated single-layer errors near the spheroid for several spacings.

    python scripts/spheroid_table.py --h-inv 16 32 64 --out results/spheroid.csv
"""

import argparse
import sys

from stokes_near_eval.benchmarks import SPHEROID_HEADER, Experiment, RunConfig, run_spheroid, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-inv", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--engine", choices=["direct", "tree"], default="direct")
    ap.add_argument("--reference", choices=["analytic", "fine-grid"], default="analytic")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rows = []
    for h in args.h_inv:
        run = run_spheroid(RunConfig(Experiment.SPHEROID, h, args.engine, reference=args.reference))
        print(f"1/h={h}: max {run.max_err:.3e}  L2 {run.l2_err:.3e}  ({run.cpu_seconds:.1f}s)", file=sys.stderr)
        rows.append(run.row())
    write_csv(args.out or sys.stdout, SPHEROID_HEADER, rows)


if __name__ == "__main__":
    main()
