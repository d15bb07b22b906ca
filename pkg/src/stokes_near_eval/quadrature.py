"""Grid-projection surface quadrature and near-surface target generation.

Quadrature points are where grid lines (two coordinates fixed at multiples
of ``h``) cross the surface.  A point on a line parallel to axis ``i`` belongs
to set ``i`` when ``|n_i| >= cos(THETA_Q)``; its weight is
``psi_i(n) / |n_i| * h**2`` with ``psi`` a partition of unity built from a
bump function of the angle between ``n`` and ``e_i``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormal, RootFindingFailure
from .geometry import ClosestPointResult, ImplicitSurface

THETA_Q = np.deg2rad(70.0)
ROOT_TOL = 1e-12
ROOT_MAX_STEPS = 100


def bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    r2 = r[inside] ** 2
    out[inside] = np.exp(2.0 * r2 / (r2 - 1.0))
    return out if out.ndim else float(out)


def pou_weights(n):
    """Partition of unity ``(psi_1, psi_2, psi_3)`` for unit normals ``n``."""
    n = np.asarray(n, dtype=float)
    angle = np.arccos(np.clip(np.abs(n), 0.0, 1.0))
    beta = bump(angle / THETA_Q)
    total = np.sum(beta, axis=-1, keepdims=True)
    if np.any(total <= 0.0):
        raise DegenerateNormal("partition of unity undefined; normal is not unit length?")
    return beta / total


@dataclass(frozen=True)
class QuadratureSet:
    x: np.ndarray
    n: np.ndarray
    w: np.ndarray
    set_index: np.ndarray  # 1, 2 or 3
    h: float
    surface: ImplicitSurface

    def __len__(self):
        return len(self.w)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "x3", "n1", "n2", "n3", "w", "set_index"])
            for x, n, w, s in zip(self.x, self.n, self.w, self.set_index):
                writer.writerow([*(f"{v:.17g}" for v in (*x, *n, w)), int(s)])


@dataclass(frozen=True)
class Targets:
    """Evaluation points with their closest-point data."""

    y: np.ndarray
    x0: np.ndarray
    b: np.ndarray
    n0: np.ndarray

    def __len__(self):
        return len(self.b)

    @classmethod
    def from_points(cls, surface, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        cp = surface.closest_point(y)
        return cls(y, cp.x0, cp.b, cp.n0)

    @classmethod
    def on_surface(cls, qs: QuadratureSet):
        return cls(qs.x, qs.x, np.zeros(len(qs)), qs.n)

    @property
    def closest(self):
        return ClosestPointResult(self.x0, self.b, self.n0)


def _grid_range(lo, hi, h, pad=0):
    return np.arange(int(np.floor(lo / h)) - pad, int(np.ceil(hi / h)) + pad + 1)


def _line_roots(surface, axis, fixed, h, lo, hi):
    """Crossings of the lines ``x[other axes] = fixed`` with the surface.

    ``fixed`` has shape ``(L, 2)``.  Returns the crossing points ``(R, 3)``.
    """
    others = [a for a in range(3) if a != axis]
    ts = _grid_range(lo[axis], hi[axis], h, pad=1) * h
    pts = np.empty((len(fixed), len(ts), 3))
    pts[:, :, others[0]] = fixed[:, None, 0]
    pts[:, :, others[1]] = fixed[:, None, 1]
    pts[:, :, axis] = ts[None, :]
    outside = surface.level_value(pts) > 0.0
    line_idx, seg = np.nonzero(outside[:, :-1] != outside[:, 1:])
    if len(line_idx) == 0:
        return np.empty((0, 3))

    base = pts[line_idx, seg].copy()
    a = ts[seg].copy()
    b = ts[seg + 1].copy()
    a_out = outside[line_idx, seg]  # sign of phi at the lower end

    def phi_at(t):
        p = base.copy()
        p[:, axis] = t
        return surface.level_value(p)

    for _ in range(ROOT_MAX_STEPS):
        mid = 0.5 * (a + b)
        m_out = phi_at(mid) > 0.0
        same = m_out == a_out
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
        if np.max(b - a) <= ROOT_TOL * 1e-3:
            break
    if np.max(b - a) > ROOT_TOL:
        raise RootFindingFailure("grid-line root bracketing did not converge")
    t = 0.5 * (a + b)
    # one guarded Newton polish
    p = base.copy()
    p[:, axis] = t
    dphi = surface.gradient(p)[:, axis]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_new = t - surface.level_value(p) / dphi
    ok = np.isfinite(t_new) & (t_new >= a) & (t_new <= b)
    p[:, axis] = np.where(ok, t_new, t)
    return p


def build_quadrature(surface: ImplicitSurface, h: float) -> QuadratureSet:
    lo, hi = surface.bounds()
    xs, ns, ws, sets = [], [], [], []
    cos_cut = np.cos(THETA_Q)
    for axis in range(3):
        o1, o2 = [a for a in range(3) if a != axis]
        g1 = _grid_range(lo[o1], hi[o1], h) * h
        g2 = _grid_range(lo[o2], hi[o2], h) * h
        fixed = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = _line_roots(surface, axis, fixed, h, lo, hi)
        if len(pts) == 0:
            continue
        n = surface.normal(pts)
        keep = np.abs(n[:, axis]) >= cos_cut
        pts, n = pts[keep], n[keep]
        psi = pou_weights(n)[:, axis]
        xs.append(pts)
        ns.append(n)
        ws.append(psi / np.abs(n[:, axis]) * h * h)
        sets.append(np.full(len(pts), axis + 1, dtype=np.int64))
    return QuadratureSet(
        np.concatenate(xs), np.concatenate(ns), np.concatenate(ws), np.concatenate(sets), h, surface
    )


def integrate(qs: QuadratureSet, f):
    """Weighted sum of ``f`` over the quadrature points.

    ``f`` is a callable of the point array or an array of nodal values with
    leading dimension ``len(qs)``.
    """
    vals = f(qs.x) if callable(f) else np.asarray(f, dtype=float)
    return np.tensordot(qs.w, vals, axes=(0, 0))


def generate_targets(surface: ImplicitSurface, h: float) -> Targets:
    """Grid points ``(i, j, k) * h`` outside the surface within distance ``h``."""
    lo, hi = surface.bounds()
    i1 = _grid_range(lo[0], hi[0], h, pad=2)
    g2 = _grid_range(lo[1], hi[1], h, pad=2) * h
    g3 = _grid_range(lo[2], hi[2], h, pad=2) * h
    plane = np.stack(np.meshgrid(g2, g3, indexing="ij"), axis=-1).reshape(-1, 2)
    chunks = []
    for i in i1:
        y = np.empty((len(plane), 3))
        y[:, 0] = i * h
        y[:, 1:] = plane
        phi = surface.level_value(y)
        grad = np.linalg.norm(surface.gradient(y), axis=-1)
        cand = (phi > 0.0) & (phi <= 2.0 * h * grad)
        if np.any(cand):
            chunks.append(y[cand])
    y = np.concatenate(chunks)
    cp = surface.closest_point(y)
    keep = (cp.b > 0.0) & (cp.b <= h)
    return Targets(y[keep], cp.x0[keep], cp.b[keep], cp.n0[keep])
