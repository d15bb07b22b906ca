"""Self-convergence of the interface velocity of two nearly touching drops.

    python scripts/two_drops.py --h-inv 16 32 64 --out results/twodrops.csv

Also saves each level's nodes and velocity as ``.npz`` next to ``--out``
when an output path is given.
"""

import argparse
import pathlib
import sys

import numpy as np

from stokes_near_eval.benchmarks import twodrops_parameters, write_csv
from stokes_near_eval.twodrop import TWODROP_HEADER, DropConfiguration, convergence_table, solve_level


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h-inv", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    if args.out:
        pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    cfg = DropConfiguration()
    levels = []
    for h in sorted(args.h_inv):
        theta, n0, p = twodrops_parameters(h)
        lev = solve_level(h, cfg, theta, n0, p, tol=args.tol)
        print(f"1/h={h}: {lev.iterations} iterations, {lev.seconds:.0f}s", file=sys.stderr)
        levels.append(lev)
        if args.out:
            path = pathlib.Path(args.out).with_name(f"twodrops_{h}.npz")
            np.savez(path, points=lev.points, velocity=lev.velocity, residuals=lev.residuals)
    write_csv(args.out or sys.stdout, TWODROP_HEADER, convergence_table(levels))


if __name__ == "__main__":
    main()
