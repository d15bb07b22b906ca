"""Command line entry point: ``stokes-near-eval <experiment> [options]``.

Exit status is 0 on success, 2 for an invalid configuration and 3 when a
numerical routine fails (projection, root finding, GMRES, ...).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .benchmarks import (
    SCALING_HEADER,
    SPHEROID_HEADER,
    SWEEP_HEADER,
    Experiment,
    RunConfig,
    run_scaling,
    run_spheroid,
    run_sweep,
    twodrops_parameters,
    write_csv,
)
from .errors import ConfigError, NumericalFailure
from .twodrop import TWODROP_HEADER, DropConfiguration, convergence_table, solve_level

log = logging.getLogger("stokes_near_eval")

DEFAULT_H_INV = {"spheroid": 32, "sweep": 128, "scaling": 128, "twodrops": 64}


def build_parser():
    p = argparse.ArgumentParser(prog="stokes-near-eval", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--h-inv", type=int, default=None,
                   help="1/h; for scaling and twodrops the finest level (coarser levels halve it)")
    p.add_argument("--engine", choices=["direct", "tree"], default=None,
                   help="summation engine (default: direct for spheroid, tree otherwise)")
    p.add_argument("--theta", type=float, default=None, help="MAC parameter")
    p.add_argument("--n0", type=int, default=None, help="leaf capacity")
    p.add_argument("--degree", type=int, default=None, help="interpolation degree p")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--reference", choices=["analytic", "fine-grid"], default="analytic",
                   help="spheroid reference solution")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _levels(finest, coarsest):
    if finest < coarsest or finest & (finest - 1):
        raise ConfigError(f"--h-inv must be a power of two >= {coarsest}")
    out, h = [], coarsest
    while h <= finest:
        out.append(h)
        h *= 2
    return out


def run(args):
    exp = args.experiment
    h_inv = args.h_inv if args.h_inv is not None else DEFAULT_H_INV[exp]
    engine = args.engine or ("direct" if exp == "spheroid" else "tree")
    cfg = RunConfig(exp, h_inv, engine, args.theta, args.n0, args.degree, args.threads,
                    reference=args.reference, out=args.out)
    if cfg.threads is not None:
        import numba

        if cfg.threads > numba.config.NUMBA_NUM_THREADS:
            raise ConfigError(f"at most {numba.config.NUMBA_NUM_THREADS} threads available")
        numba.set_num_threads(cfg.threads)

    if exp == "spheroid":
        header, rows = SPHEROID_HEADER, [run_spheroid(cfg).row()]
    elif exp == "sweep":
        header, rows = SWEEP_HEADER, run_sweep(h_inv, reference=cfg.reference)
    elif exp == "scaling":
        rows, sd, st = run_scaling(_levels(h_inv, 32))
        log.info("log-log slopes: direct %.3f, tree %.3f", sd, st)
        header = SCALING_HEADER
    else:
        levels = []
        for h in _levels(h_inv, 16):
            theta, n0, p = twodrops_parameters(h)
            theta = args.theta if args.theta is not None else theta
            n0 = args.n0 if args.n0 is not None else n0
            p = args.degree if args.degree is not None else p
            lev = solve_level(h, DropConfiguration(), theta, n0, p)
            log.info("1/h=%d: %d iterations in %.1f s", h, lev.iterations, lev.seconds)
            levels.append(lev)
        header, rows = TWODROP_HEADER, convergence_table(levels)

    write_csv(args.out or sys.stdout, header, rows)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        run(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
