"""Benchmark problems and experiment runners behind the command line.

The spheroid benchmark is the single-layer flow past the prolate spheroid
``x1^2 + 4 x2^2 + 4 x3^2 = 1`` translating with unit speed along ``x1``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import CalibrationFailure, ConfigError
from .geometry import Spheroid
from .layer_eval import DeltaSchedule, DirectEngine, TreecodeEngine, evaluate_velocity
from .quadrature import QuadratureSet, Targets, build_quadrature, generate_targets

SPHEROID = Spheroid((1.0, 0.5, 0.5))

# Line-singularity representation of the translating prolate spheroid: a
# Stokeslet line of strength ALPHA plus a potential doublet of strength
# BETA (c^2 - xi^2) between the foci.
_ECC = math.sqrt(3.0) / 2.0
_FOCUS = _ECC
_LE = math.log((1.0 + _ECC) / (1.0 - _ECC))
ALPHA = _ECC**2 / (-2.0 * _ECC + (1.0 + _ECC**2) * _LE)
BETA = ALPHA * (1.0 - _ECC**2) / (2.0 * _ECC**2)
F0_EXACT = 8.0 * _FOCUS * ALPHA


class Experiment(str, Enum):
    SPHEROID = "spheroid"
    SWEEP = "sweep"
    SCALING = "scaling"
    TWODROPS = "twodrops"


class Reference(str, Enum):
    ANALYTIC = "analytic"
    FINE_GRID = "fine-grid"


def parameter_policy(h_inv):
    """Treecode parameters ``(theta, N0, p)`` for grid spacing ``1/h_inv``.

    ``(1000, 6)`` for ``h_inv <= 32``, ``(2000, 6)`` at 64, then ``N0``
    doubles and ``p`` grows by two with each halving of ``h``.
    """
    if h_inv < 1:
        raise ConfigError("h_inv must be positive")
    if h_inv <= 32:
        return 0.6, 1000, 6
    halvings = max(0, int(round(math.log2(h_inv / 64))))
    return 0.6, 2000 * 2**halvings, 6 + 2 * halvings


_TWODROP_PRESET = {16: (1000, 6), 32: (1000, 6), 64: (2000, 8), 128: (4000, 10), 256: (8000, 12)}


def twodrops_parameters(h_inv):
    """Treecode parameters used for the two-drop runs (explicit table)."""
    if h_inv in _TWODROP_PRESET:
        return (0.6, *_TWODROP_PRESET[h_inv])
    return parameter_policy(h_inv)


@dataclass
class RunConfig:
    experiment: Experiment = Experiment.SPHEROID
    h_inv: int = 32
    engine: str = "direct"
    theta: float | None = None
    leaf_capacity: int | None = None
    degree: int | None = None
    threads: int | None = None
    rhos: tuple = (3.0, 4.0, 5.0)
    reference: Reference = Reference.ANALYTIC
    out: str | None = None

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.reference = Reference(self.reference)
        if self.engine not in ("direct", "tree"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if not isinstance(self.h_inv, (int, np.integer)) or self.h_inv < 2:
            raise ConfigError("h_inv must be an integer >= 2")
        preset = twodrops_parameters if self.experiment is Experiment.TWODROPS else parameter_policy
        theta, n0, p = preset(self.h_inv)
        self.theta = theta if self.theta is None else float(self.theta)
        self.leaf_capacity = n0 if self.leaf_capacity is None else int(self.leaf_capacity)
        self.degree = p if self.degree is None else int(self.degree)
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must lie in (0, 1)")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if self.leaf_capacity < 1:
            raise ConfigError("leaf capacity must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        DeltaSchedule(1.0 / self.h_inv, tuple(self.rhos))

    @property
    def h(self):
        return 1.0 / self.h_inv

    def make_engine(self):
        if self.engine == "direct":
            return DirectEngine()
        return TreecodeEngine(self.theta, self.leaf_capacity, self.degree)


# -- spheroid benchmark -------------------------------------------------------


def spheroid_density(x, F0=F0_EXACT):
    x = np.asarray(x, dtype=float)
    f = np.zeros_like(x)
    f[..., 0] = F0 / np.sqrt(1.0 - 0.75 * x[..., 0] ** 2)
    return f


def analytic_velocity(y, n_nodes=256):
    """Exterior velocity of the translating spheroid at points ``y``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi, wq = np.polynomial.legendre.leggauss(n_nodes)
    xi, wq = xi * _FOCUS, wq * _FOCUS
    out = np.empty_like(y)
    for s in range(0, len(y), 2048):
        d = np.repeat(y[s : s + 2048, None, :], n_nodes, axis=1)
        d[..., 0] -= xi
        r2 = np.sum(d * d, axis=-1)
        r = np.sqrt(r2)
        # Stokeslet and doublet applied to e1
        stk = d * (d[..., :1] / (r2 * r)[..., None])
        stk[..., 0] += 1.0 / r
        dbl = 3.0 * d * (d[..., :1] / (r2 * r2 * r)[..., None])
        dbl[..., 0] -= 1.0 / (r2 * r)
        kern = ALPHA * stk - BETA * (_FOCUS**2 - xi**2)[None, :, None] * dbl
        out[s : s + 2048] = np.einsum("k,mkd->md", wq, kern)
    return out


@dataclass
class FineGridOracle:
    """Extrapolated single layer on a grid four times finer than the run."""

    h_ref: float
    engine: object = field(default_factory=DirectEngine)
    F0: float = F0_EXACT

    def __call__(self, targets: Targets):
        qs = cached_quadrature(self.h_ref)
        return evaluate_velocity(qs, lambda x: spheroid_density(x, self.F0), targets,
                                 DeltaSchedule(self.h_ref), self.engine)


@lru_cache(maxsize=4)
def cached_quadrature(h):
    return build_quadrature(SPHEROID, h)


@lru_cache(maxsize=4)
def cached_targets(h):
    return generate_targets(SPHEROID, h)


def spheroid_reference(targets: Targets, backend=Reference.ANALYTIC, h=None, engine=None):
    backend = Reference(backend)
    if backend is Reference.ANALYTIC:
        return analytic_velocity(targets.y)
    if h is None:
        raise ConfigError("fine-grid reference needs the run spacing h")
    return FineGridOracle(h / 4.0, engine or DirectEngine())(targets)


def calibrate_F0(qs: QuadratureSet, point=None, engine=None):
    """``F0`` such that the surface velocity at ``point`` is ``(1, 0, 0)``.

    The single layer is evaluated with ``F0 = 1`` at a surface point (a
    target with ``b = 0``) and the result inverted.
    """
    point = np.array([[0.0, 0.5, 0.0]]) if point is None else np.atleast_2d(point)
    cp = qs.surface.closest_point(point)
    targets = Targets(cp.x0, cp.x0, np.zeros(len(cp.b)), cp.n0)
    u = evaluate_velocity(qs, lambda x: spheroid_density(x, 1.0), targets, DeltaSchedule(qs.h), engine)
    u1 = float(u[0, 0])
    if not np.isfinite(u1) or abs(u1) < 1e-6:
        raise CalibrationFailure(f"measured surface velocity {u1!r} too small to calibrate")
    return 1.0 / u1


def error_norms(u, ref):
    """Maximum and root-mean-square of the pointwise error magnitude."""
    e = np.linalg.norm(np.asarray(u) - np.asarray(ref), axis=-1)
    return float(np.max(e)), float(np.sqrt(np.mean(e * e)))


@dataclass
class SpheroidRun:
    h_inv: int
    n_quads: int
    n_targets: int
    max_err: float
    l2_err: float
    cpu_seconds: float
    velocity: np.ndarray = field(repr=False)
    timings: dict = field(default_factory=dict)

    def row(self):
        return [self.h_inv, self.n_quads, self.n_targets, self.max_err, self.l2_err, self.cpu_seconds]


SPHEROID_HEADER = ["h_inv", "n_quads", "n_targets", "max_err", "l2_err", "cpu_seconds"]


def run_spheroid(config: RunConfig, reference=None) -> SpheroidRun:
    """Extrapolated single layer near the spheroid and its error.

    ``reference`` may be precomputed velocities at the targets; otherwise
    the configured backend is used.  ``cpu_seconds`` is wall time of the
    evaluation phase (tree build and modified weights excluded).
    """
    h = config.h
    qs = cached_quadrature(h)
    targets = cached_targets(h)
    engine = config.make_engine()
    if isinstance(engine, TreecodeEngine):
        engine.treecode(qs)
    t0 = time.perf_counter()
    u = evaluate_velocity(qs, spheroid_density, targets, DeltaSchedule(h, tuple(config.rhos)), engine)
    wall = time.perf_counter() - t0
    timings = dict(engine.timings)
    if reference is None:
        reference = spheroid_reference(targets, config.reference, h)
    max_err, l2_err = error_norms(u, reference)
    return SpheroidRun(config.h_inv, len(qs), len(targets), max_err, l2_err,
                       timings.get("eval", wall), u, timings)


SWEEP_HEADER = ["theta", "N0", "p", "l2_err", "cpu_seconds"]


def run_sweep(h_inv=128, thetas=(0.4, 0.6, 0.8), leaf_capacities=(2000, 4000, 8000),
              degrees=(6, 8, 10, 12), reference=Reference.ANALYTIC):
    """Treecode rows over the parameter grid followed by the direct baseline
    (reported with empty ``theta``, ``N0`` and ``p``)."""
    targets = cached_targets(1.0 / h_inv)
    ref = spheroid_reference(targets, reference, 1.0 / h_inv)
    rows = []
    for theta in thetas:
        for n0 in leaf_capacities:
            for p in degrees:
                cfg = RunConfig(Experiment.SWEEP, h_inv, "tree", theta, n0, p)
                r = run_spheroid(cfg, ref)
                rows.append([theta, n0, p, r.l2_err, r.cpu_seconds])
    base = run_spheroid(RunConfig(Experiment.SWEEP, h_inv, "direct"), ref)
    rows.append(["", "", "", base.l2_err, base.cpu_seconds])
    return rows


SCALING_HEADER = ["N", "direct_seconds", "tree_seconds"]


def loglog_slope(n, t):
    n, t = np.log(np.asarray(n, dtype=float)), np.log(np.asarray(t, dtype=float))
    return float(np.polyfit(n, t, 1)[0])


def run_scaling(h_invs=(32, 64, 128), direct_budget=None):
    """Evaluation time of both engines as ``N`` grows.

    When a measured direct time exceeds ``direct_budget`` seconds, larger
    grids are not run directly; their time is extrapolated quadratically in
    ``N`` and flagged with ``*``.  Returns ``(rows, direct_slope, tree_slope)``.
    """
    rows, ns, td, tt = [], [], [], []
    skip = False
    for h_inv in h_invs:
        tree = run_spheroid(RunConfig(Experiment.SCALING, h_inv, "tree"), reference=np.zeros((1, 3)))
        n = tree.n_quads
        if skip:
            est = td[-1] * (n / ns[-1]) ** 2
            direct_cell = f"{est:.6g}*"
            td.append(est)
        else:
            d = run_spheroid(RunConfig(Experiment.SCALING, h_inv, "direct"), reference=np.zeros((1, 3)))
            td.append(d.cpu_seconds)
            direct_cell = d.cpu_seconds
            skip = direct_budget is not None and d.cpu_seconds > direct_budget
        ns.append(n)
        tt.append(tree.cpu_seconds)
        rows.append([n, direct_cell, tree.cpu_seconds])
    return rows, loglog_slope(ns, td), loglog_slope(ns, tt)


def format_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def write_csv(target, header, rows):
    """Write ``rows`` under one header row to a path or an open text stream."""
    import csv

    def emit(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])

    if hasattr(target, "write"):
        emit(target)
    else:
        with open(target, "w", newline="") as fh:
            emit(fh)
