"""Evaluation time of the direct sum and the treecode as N grows.

Direct runs above ``--budget`` seconds stop further direct runs; the larger
sizes are then estimated quadratically and marked with ``*``.
"""

import argparse
import sys

from stokes_near_eval.benchmarks import SCALING_HEADER, run_scaling, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-inv", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--budget", type=float, default=None, help="direct-sum time budget in seconds")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    rows, sd, st = run_scaling(tuple(args.h_inv), args.budget)
    print(f"log-log slopes: direct {sd:.2f}, tree {st:.2f}", file=sys.stderr)
    write_csv(args.out or sys.stdout, SCALING_HEADER, rows)


if __name__ == "__main__":
    main()
