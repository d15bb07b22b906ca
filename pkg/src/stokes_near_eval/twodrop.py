"""Interface velocity of two nearly touching viscous drops.

On each interface ``b`` the velocity satisfies

    (lambda_b + 1) u = -2/mu0 sum_m SL_m[f] + sum_m 2 (lambda_m - 1) DL_m[u],

where ``SL`` and ``DL`` are the subtracted single and double layers (each
carrying ``1/8pi``).  Self-surface blocks use a single on-surface delta of
``3h``.  Blocks coupling the two drops are nearly singular and use the
three-delta extrapolation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import MaxIterationsExceeded, MissingPoint
from .geometry import Sphere
from .layer_eval import (
    DeltaSchedule,
    SurfaceInterpolator,
    TreecodeEngine,
    evaluate_velocity,
    evaluate_velocity_on_surface,
)
from .quadrature import QuadratureSet, Targets, build_quadrature


@dataclass(frozen=True)
class DropConfiguration:
    eps: float = 1.0 / 16**3
    radius: float = 1.0
    mu0: float = 1.0
    mu: tuple = (2.0, 2.0)

    def __post_init__(self):
        if 2.0 * self.radius >= math.hypot(2.0, self.eps):
            raise ValueError("drops overlap")
        if self.mu0 <= 0 or min(self.mu) <= 0:
            raise ValueError("viscosities must be positive")

    @property
    def lambdas(self):
        return tuple(m / self.mu0 for m in self.mu)

    @property
    def surfaces(self):
        return (Sphere((0.0, 0.0, 0.0), self.radius), Sphere((2.0, 0.0, self.eps), self.radius))

    @property
    def gap(self):
        return math.hypot(2.0, self.eps) - 2.0 * self.radius


def surface_tension(sphere: Sphere, x):
    x = np.asarray(x, dtype=float)
    return 1.0 + (x[..., 0] - sphere.center[0]) ** 2


def surface_force(sphere: Sphere, x):
    """Force jump ``2 gamma H n - grad_S gamma``."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    grad[..., 0] = 2.0 * (x[..., 0] - sphere.center[0])
    gamma = surface_tension(sphere, x)
    n = sphere.normal(x)
    return 2.0 * (gamma * sphere.mean_curvature(x))[..., None] * n - sphere.surface_gradient(grad, x)


class TwoDropSystem:
    """Discretized two-drop operator and right-hand side at spacing ``h``.

    ``engine`` evaluates every block; one treecode per surface is built on
    first use and reused across operator applications.
    """

    def __init__(self, config: DropConfiguration, h, engine=None):
        self.config = config
        self.h = h
        self.engine = engine or TreecodeEngine()
        self.surfaces = config.surfaces
        self.quadsets = tuple(build_quadrature(s, h) for s in self.surfaces)
        self.sizes = tuple(len(q) for q in self.quadsets)
        self.schedule = DeltaSchedule(h)
        # cross[(b, m)]: targets on surface b seen from surface m
        self.cross = {}
        self.interp = {}
        for b in range(2):
            m = 1 - b
            tg = Targets.from_points(self.surfaces[m], self.quadsets[b].x)
            self.cross[b, m] = tg
            self.interp[b, m] = SurfaceInterpolator(self.quadsets[m], tg.x0)
        self.n_applications = 0
        self.timings = {"operator": 0.0, "rhs": 0.0}

    @property
    def size(self):
        return 3 * sum(self.sizes)

    @property
    def points(self):
        return np.concatenate([q.x for q in self.quadsets])

    def split(self, vec):
        vec = np.asarray(vec, dtype=float).reshape(-1, 3)
        return vec[: self.sizes[0]], vec[self.sizes[0] :]

    def rhs(self, force=None):
        """``-2/mu0 sum_m SL_m[f]`` at every node, flattened."""
        t0 = time.perf_counter()
        force = force or surface_force
        out = []
        for b in range(2):
            qb = self.quadsets[b]
            fb = force(self.surfaces[b], qb.x)
            acc = evaluate_velocity_on_surface(qb, fb, engine=self.engine, layer="single")
            m = 1 - b
            sm = self.surfaces[m]
            acc = acc + evaluate_velocity(self.quadsets[m], lambda x, s=sm: force(s, x), self.cross[b, m],
                                          self.schedule, self.engine, layer="single")
            out.append(-2.0 / self.config.mu0 * acc)
        self.timings["rhs"] += time.perf_counter() - t0
        return np.concatenate(out).ravel()

    def double_layers(self, vec):
        """``DL_m[u]`` at the nodes of each surface ``b``, keyed ``(b, m)``."""
        us = self.split(vec)
        out = {}
        for b in range(2):
            out[b, b] = evaluate_velocity_on_surface(self.quadsets[b], us[b], engine=self.engine, layer="double")
            m = 1 - b
            q0 = self.interp[b, m](us[m])
            out[b, m] = evaluate_velocity(self.quadsets[m], us[m], self.cross[b, m], self.schedule, self.engine,
                                          layer="double", chi=0.0, density_x0=q0)
        return out

    def apply(self, vec):
        t0 = time.perf_counter()
        us = self.split(vec)
        lam = self.config.lambdas
        dl = self.double_layers(vec)
        out = []
        for b in range(2):
            acc = (lam[b] + 1.0) * us[b]
            for m in range(2):
                if lam[m] != 1.0:
                    acc = acc - 2.0 * (lam[m] - 1.0) * dl[b, m]
            out.append(acc)
        self.n_applications += 1
        self.timings["operator"] += time.perf_counter() - t0
        return np.concatenate(out).ravel()

    __call__ = apply


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


def solve_gmres(operator, rhs, tol=1e-10, max_iter=200, x0=None):
    """Full (unrestarted) GMRES with modified Gram-Schmidt.

    Stops when ``|A x - b| / |b| <= tol`` measured by the Arnoldi residual
    estimate.  ``residuals`` holds the relative residual after each
    iteration, starting with the initial one.
    """
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return GMRESResult(np.zeros_like(rhs), 0, [0.0])
    x0 = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float)
    r0 = rhs - operator(x0) if np.any(x0) else rhs.copy()
    beta = np.linalg.norm(r0)
    residuals = [beta / bnorm]
    if residuals[0] <= tol:
        return GMRESResult(x0, 0, residuals)

    basis = [r0 / beta]
    hess = np.zeros((max_iter + 1, max_iter))
    cs, sn = np.zeros(max_iter), np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta

    def solution(k):
        y = np.linalg.solve(np.triu(hess[:k, :k]), g[:k]) if k else np.zeros(0)
        return x0 + np.column_stack(basis[:k]) @ y if k else x0

    for j in range(max_iter):
        w = operator(basis[j])
        for i in range(j + 1):
            hess[i, j] = np.dot(w, basis[i])
            w = w - hess[i, j] * basis[i]
        hnext = np.linalg.norm(w)
        hess[j + 1, j] = hnext
        for i in range(j):
            a, b_ = hess[i, j], hess[i + 1, j]
            hess[i, j] = cs[i] * a + sn[i] * b_
            hess[i + 1, j] = -sn[i] * a + cs[i] * b_
        denom = math.hypot(hess[j, j], hess[j + 1, j])
        cs[j], sn[j] = hess[j, j] / denom, hess[j + 1, j] / denom
        hess[j, j] = denom
        hess[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        residuals.append(abs(g[j + 1]) / bnorm)
        # hnext == 0 is a lucky breakdown: the Krylov space holds the solution
        if residuals[-1] <= tol or hnext == 0.0:
            return GMRESResult(solution(j + 1), j + 1, residuals)
        basis.append(w / hnext)
    raise MaxIterationsExceeded(
        f"GMRES did not reach {tol:g} in {max_iter} iterations (residual {residuals[-1]:.3g})",
        x=solution(max_iter),
        residuals=residuals,
    )


def self_convergence_error(u_coarse, u_fine, coarse_points, fine_points, match_tol=1e-10):
    """Max and RMS of ``|u_h - u_{h/2}|`` over the coarse nodes.

    Every coarse node must coincide with a fine node within ``match_tol``.
    """
    u_coarse = np.asarray(u_coarse, dtype=float).reshape(-1, 3)
    u_fine = np.asarray(u_fine, dtype=float).reshape(-1, 3)
    dist, idx = cKDTree(fine_points).query(coarse_points)
    if np.any(dist > match_tol):
        bad = int(np.argmax(dist))
        raise MissingPoint(f"coarse node {np.asarray(coarse_points)[bad]} has no fine counterpart "
                           f"(nearest at {dist[bad]:.3g})")
    e = np.linalg.norm(u_coarse - u_fine[idx], axis=1)
    return float(np.max(e)), float(np.sqrt(np.mean(e * e)))


@dataclass
class DropLevel:
    h_inv: int
    leaf_capacity: int
    degree: int
    iterations: int
    points: np.ndarray = field(repr=False)
    velocity: np.ndarray = field(repr=False)
    residuals: list = field(default_factory=list, repr=False)
    seconds: float = 0.0
    system: TwoDropSystem | None = field(default=None, repr=False)


def solve_level(h_inv, config=None, theta=0.6, leaf_capacity=1000, degree=6, tol=1e-10, max_iter=200,
                engine=None):
    config = config or DropConfiguration()
    t0 = time.perf_counter()
    system = TwoDropSystem(config, 1.0 / h_inv, engine or TreecodeEngine(theta, leaf_capacity, degree))
    res = solve_gmres(system, system.rhs(), tol, max_iter)
    return DropLevel(h_inv, leaf_capacity, degree, res.iterations, system.points, res.x.reshape(-1, 3),
                     res.residuals, time.perf_counter() - t0, system)


TWODROP_HEADER = ["h_inv", "N0", "p", "iterations", "max_err", "order_max", "l2_err", "order_l2"]


def convergence_table(levels):
    """Rows in the layout of the self-convergence table.

    The error on row ``h`` compares ``u_h`` with ``u_{h/2}`` (so the finest
    level has none); orders are ``log2`` of successive error ratios.
    """
    rows, prev = [], None
    for i, lev in enumerate(levels):
        err = None
        if i + 1 < len(levels):
            nxt = levels[i + 1]
            err = self_convergence_error(lev.velocity, nxt.velocity, lev.points, nxt.points)
        orders = ["--", "--"]
        if err is not None and prev is not None:
            orders = [math.log2(prev[0] / err[0]), math.log2(prev[1] / err[1])]
        cells = ["--", "--"] if err is None else list(err)
        rows.append([lev.h_inv, lev.leaf_capacity, lev.degree, lev.iterations,
                     cells[0], orders[0], cells[1], orders[1]])
        prev = err
    return rows
