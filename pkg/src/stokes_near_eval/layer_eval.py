"""Subtracted single/double layer sums and three-delta extrapolation.

For each target the regularized sum is split as ``u_delta = u_far +
u_near_delta``: source points farther than ``6 * max(delta)`` contribute the
same plain-kernel value to every delta and are summed once.  The three
values are then combined by the closed-form solution of

    u + c1 rho_i I0(b / delta_i) + c2 rho_i^3 I2(b / delta_i) = u_{delta_i}.

Engines compute the raw ``(near, far)`` sums; everything here is
engine-agnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.spatial import cKDTree
from scipy.special import erfc

from .errors import ConfigError, SingularSystem
from .kernels import dl_accumulate, sl_accumulate
from .quadrature import QuadratureSet, Targets
from .treecode import Treecode

INV_8PI = 1.0 / (8.0 * math.pi)


@dataclass(frozen=True)
class DeltaSchedule:
    h: float
    rhos: tuple = (3.0, 4.0, 5.0)

    def __post_init__(self):
        r = np.asarray(self.rhos, dtype=float)
        if not (np.isfinite(self.h) and self.h > 0):
            raise ConfigError("grid spacing must be positive")
        if len(r) != 3 or np.any(np.diff(r) <= 0) or np.any(r < 2.0):
            raise ConfigError("rhos must be three strictly increasing values >= 2")

    @property
    def deltas(self):
        return np.asarray(self.rhos, dtype=float) * self.h


def I0(lam):
    lam = np.abs(np.asarray(lam, dtype=float))
    return np.exp(-lam * lam) / math.sqrt(math.pi) - lam * erfc(lam)


def I2(lam):
    lam = np.abs(np.asarray(lam, dtype=float))
    return (2.0 / 3.0) * ((0.5 - lam * lam) * np.exp(-lam * lam) / math.sqrt(math.pi) + lam**3 * erfc(lam))


def extrapolation_matrix(b, h, rhos):
    """Rows ``[1, rho_i I0(lambda_i), rho_i^3 I2(lambda_i)]``, shape ``(M, 3, 3)``."""
    rho = np.asarray(rhos, dtype=float)
    lam = np.asarray(b, dtype=float)[..., None] / (rho * h)
    mat = np.empty(lam.shape + (3,))
    mat[..., 0] = 1.0
    mat[..., 1] = rho * I0(lam)
    mat[..., 2] = rho**3 * I2(lam)
    return mat


def extrapolation_weights(b, h, rhos):
    """Weights ``w`` with ``u = sum_i w_i u_{delta_i}`` (they sum to one).

    Computed from the column-one cofactors of the extrapolation matrix.  When
    every entry of the second and third columns underflows (targets far from
    the surface) the weights tend to ``(1, 0, 0)``.
    """
    rho = np.asarray(rhos, dtype=float)
    at_zero = extrapolation_matrix(np.zeros(1), 1.0, rho)[0]
    scale = np.prod(np.linalg.norm(at_zero, axis=0))
    if abs(np.linalg.det(at_zero)) < 1e-14 * scale:
        raise SingularSystem("extrapolation system is singular; deltas must be distinct")
    mat = extrapolation_matrix(b, h, rho)
    a, c = mat[..., 1], mat[..., 2]
    cof = np.stack(
        [
            a[..., 1] * c[..., 2] - a[..., 2] * c[..., 1],
            a[..., 2] * c[..., 0] - a[..., 0] * c[..., 2],
            a[..., 0] * c[..., 1] - a[..., 1] * c[..., 0],
        ],
        axis=-1,
    )
    det = cof.sum(axis=-1, keepdims=True)
    ok = np.abs(det) > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(ok, cof / np.where(ok, det, 1.0), np.array([1.0, 0.0, 0.0]))
    return w


def extrapolate(u_delta, b, schedule: DeltaSchedule):
    """Extrapolated values from ``u_delta`` of shape ``(M, 3, ...)``."""
    u_delta = np.asarray(u_delta, dtype=float)
    w = extrapolation_weights(b, schedule.h, schedule.rhos)
    w = w.reshape(w.shape + (1,) * (u_delta.ndim - 2))
    return np.sum(w * u_delta, axis=1)


# -- engines -----------------------------------------------------------------


@numba.njit(parallel=True, cache=True)
def _sl_direct(y, alpha, x, fw, nw, deltas, sharp, near, far):
    for i in numba.prange(y.shape[0]):
        sl_accumulate(y[i], alpha[i], x, fw, nw, 0, x.shape[0], deltas, sharp, near[i], far[i])


@numba.njit(parallel=True, cache=True)
def _dl_direct(y, x0, b, n0, q0, x, q, nw, deltas, sharp, near, far):
    for i in numba.prange(y.shape[0]):
        dl_accumulate(y[i], x0[i], b[i], n0[i], q0[i], x, q, nw, 0, x.shape[0], deltas, sharp, near[i], far[i])


class DirectEngine:
    """O(MN) summation over every source for every target."""

    name = "direct"

    def __init__(self):
        self.timings = {}

    def single_layer(self, qs, fw, y, alpha, deltas, sharp):
        import time

        near = np.zeros((len(y), len(deltas), 3))
        far = np.zeros((len(y), 3))
        nw = np.ascontiguousarray(qs.n * qs.w[:, None])
        t0 = time.perf_counter()
        _sl_direct(y, alpha, np.ascontiguousarray(qs.x), np.ascontiguousarray(fw), nw, deltas, sharp, near, far)
        self.timings = {"eval": time.perf_counter() - t0, "weights": 0.0}
        return near, far

    def double_layer(self, qs, q, y, x0, b, n0, q0, deltas, sharp):
        import time

        near = np.zeros((len(y), len(deltas), 3))
        far = np.zeros((len(y), 3))
        nw = np.ascontiguousarray(qs.n * qs.w[:, None])
        t0 = time.perf_counter()
        _dl_direct(y, x0, b, n0, q0, np.ascontiguousarray(qs.x), np.ascontiguousarray(q), nw, deltas, sharp, near, far)
        self.timings = {"eval": time.perf_counter() - t0, "weights": 0.0}
        return near, far


class TreecodeEngine:
    """Treecode-accelerated sums; one tree per source set, built on first use."""

    name = "tree"

    def __init__(self, theta=0.6, leaf_capacity=2000, degree=6):
        self.theta = theta
        self.leaf_capacity = leaf_capacity
        self.degree = degree
        self._trees = {}
        self.timings = {}

    def treecode(self, qs: QuadratureSet) -> Treecode:
        key = id(qs)
        if key not in self._trees:
            self._trees[key] = (qs, Treecode(qs.x, qs.n * qs.w[:, None], self.theta, self.leaf_capacity, self.degree))
        return self._trees[key][1]

    def single_layer(self, qs, fw, y, alpha, deltas, sharp):
        tc = self.treecode(qs)
        out = tc.single_layer(fw, y, alpha, deltas, sharp)
        self.timings = dict(tc.timings)
        return out

    def double_layer(self, qs, q, y, x0, b, n0, q0, deltas, sharp):
        tc = self.treecode(qs)
        out = tc.double_layer(q, y, x0, b, n0, q0, deltas, sharp)
        self.timings = dict(tc.timings)
        return out


# -- densities at the closest point -----------------------------------------


class SurfaceInterpolator:
    """Local least-squares quadratic fit of nodal values at fixed surface points.

    Each point uses its ``k`` nearest nodes, expressed in tangent-plane
    coordinates of the surface normal there.  The fit weights are computed
    once, so repeated interpolation is a gather and a small contraction.
    """

    def __init__(self, qs: QuadratureSet, points, k=12):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, idx = cKDTree(qs.x).query(points, k=k)
        n = qs.surface.normal(points)
        helper = np.where(np.abs(n[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
        t1 = np.cross(n, helper)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(n, t1)
        rel = qs.x[idx] - points[:, None, :]
        u = np.einsum("mkd,md->mk", rel, t1) / qs.h
        v = np.einsum("mkd,md->mk", rel, t2) / qs.h
        basis = np.stack([np.ones_like(u), u, v, u * u, u * v, v * v], axis=-1)
        # first row of the pseudo-inverse gives the value at the origin
        self.weights = np.linalg.pinv(basis)[:, 0, :]
        self.index = idx

    def __call__(self, values):
        values = np.asarray(values, dtype=float)
        return np.einsum("mk,mk...->m...", self.weights, values[self.index])


def interpolate_at(qs: QuadratureSet, values, points, k=12):
    return SurfaceInterpolator(qs, points, k)(values)


def _nodal_and_x0(qs, density, targets, density_x0):
    if callable(density):
        return density(qs.x), density(targets.x0)
    nodal = np.asarray(density, dtype=float)
    if density_x0 is None:
        density_x0 = interpolate_at(qs, nodal, targets.x0)
    elif callable(density_x0):
        density_x0 = density_x0(targets.x0)
    return nodal, np.asarray(density_x0, dtype=float)


def default_chi(b):
    b = np.asarray(b, dtype=float)
    return np.where(b > 0, 0.0, np.where(b < 0, 1.0, 0.5))


# -- layer sums ---------------------------------------------------------------


def single_layer_subtracted(qs, f, targets: Targets, deltas, engine=None, f_x0=None, sharp=False):
    """Regularized subtracted single layer for each delta, shape ``(M, nd, 3)``."""
    engine = engine or DirectEngine()
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    fn, fx0 = _nodal_and_x0(qs, f, targets, f_x0)
    alpha = np.ascontiguousarray(np.sum(fx0 * targets.n0, axis=1))
    fw = np.ascontiguousarray(fn * qs.w[:, None])
    near, far = engine.single_layer(qs, fw, np.ascontiguousarray(targets.y), alpha, deltas, sharp)
    return INV_8PI * (near + far[:, None, :])


def double_layer_subtracted(qs, q, targets: Targets, deltas, chi=None, engine=None, q_x0=None, sharp=False):
    """Regularized subtracted double layer plus ``chi * q(x0)``, shape ``(M, nd, 3)``."""
    engine = engine or DirectEngine()
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    qn, qx0 = _nodal_and_x0(qs, q, targets, q_x0)
    chi = default_chi(targets.b) if chi is None else np.broadcast_to(np.asarray(chi, dtype=float), targets.b.shape)
    c = np.ascontiguousarray
    near, far = engine.double_layer(
        qs, c(qn), c(targets.y), c(targets.x0), c(targets.b, dtype=float), c(targets.n0), c(qx0), deltas, sharp
    )
    return INV_8PI * (near + far[:, None, :]) + (chi[:, None] * qx0)[:, None, :]


def evaluate_velocity(qs, density, targets, schedule: DeltaSchedule, engine=None, layer="single",
                      chi=None, density_x0=None, return_all=False):
    """Extrapolated single or double layer at near-surface ``targets``."""
    if layer == "single":
        u_delta = single_layer_subtracted(qs, density, targets, schedule.deltas, engine, density_x0)
    elif layer == "double":
        u_delta = double_layer_subtracted(qs, density, targets, schedule.deltas, chi, engine, density_x0)
    else:
        raise ValueError(f"unknown layer {layer!r}")
    u = extrapolate(u_delta, targets.b, schedule)
    return (u, u_delta) if return_all else u


def evaluate_velocity_on_surface(qs, density, targets=None, delta=None, engine=None, layer="single"):
    """Single-delta on-surface evaluation with the modified smoothing factors.

    Targets default to the quadrature nodes themselves (``b = 0``,
    ``chi = 1/2``); ``delta`` defaults to ``3h``.
    """
    targets = targets if targets is not None else Targets.on_surface(qs)
    delta = 3.0 * qs.h if delta is None else delta
    if layer == "single":
        out = single_layer_subtracted(qs, density, targets, [delta], engine, _on_surface_x0(qs, density, targets), sharp=True)
    elif layer == "double":
        out = double_layer_subtracted(qs, density, targets, [delta], 0.5, engine,
                                      _on_surface_x0(qs, density, targets), sharp=True)
    else:
        raise ValueError(f"unknown layer {layer!r}")
    return out[:, 0]


def _on_surface_x0(qs, density, targets):
    if callable(density):
        return density(targets.x0)
    if targets.y is qs.x:
        return np.asarray(density, dtype=float)
    return None
