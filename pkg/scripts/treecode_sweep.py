"""Treecode error and time over (theta, N0, p) against the direct sum.

Defaults to the spheroid at 1/h = 64, which finishes in well under an hour
on one core; ``--h-inv 128`` reproduces the full-size sweep.
"""

import argparse
import sys

from stokes_near_eval.benchmarks import SWEEP_HEADER, run_sweep, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-inv", type=int, default=64)
    ap.add_argument("--theta", type=float, nargs="+", default=[0.4, 0.6, 0.8])
    ap.add_argument("--n0", type=int, nargs="+", default=[2000, 4000, 8000])
    ap.add_argument("--degree", type=int, nargs="+", default=[6, 8, 10, 12])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    rows = run_sweep(args.h_inv, tuple(args.theta), tuple(args.n0), tuple(args.degree))
    write_csv(args.out or sys.stdout, SWEEP_HEADER, rows)


if __name__ == "__main__":
    main()
