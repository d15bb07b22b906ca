"""Kernel-independent treecode: octree, Chebyshev interpolation, traversal.

Sources are sorted into an octree whose leaves hold at most ``leaf_capacity``
points.  For each cluster the density channels are condensed onto a tensor
Chebyshev grid ("modified weights"), independent of the target.  A target
then walks the tree: well-separated clusters (``r_c <= theta * R``) are
summed through their grid with the plain kernels, leaves that fail the test
are summed directly with the regularized kernels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .kernels import (
    CUTOFF_RATIO,
    dl_accumulate,
    dl_far_approx,
    sl_accumulate,
    sl_far_approx,
)

_STACK = 8 * 64
_NODE_TOL = 1e-14
_CHUNK = 8192


@dataclass(frozen=True)
class Octree:
    """Flattened octree.  Node 0 is the root; children of a node are stored
    contiguously in octant order.  ``perm[k]`` is the original index of the
    ``k``-th point in tree order, and node ``c`` owns tree-order points
    ``start[c]:stop[c]``."""

    perm: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    child_first: np.ndarray
    n_child: np.ndarray
    leaf_capacity: int

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self):
        return 0.5 * np.linalg.norm(self.hi - self.lo, axis=1)

    @property
    def n_nodes(self):
        return len(self.start)

    @property
    def leaves(self):
        return np.nonzero(self.n_child == 0)[0]

    def depth(self):
        level = np.zeros(self.n_nodes, dtype=int)
        for c in range(self.n_nodes):
            kids = slice(self.child_first[c], self.child_first[c] + self.n_child[c])
            level[kids] = level[c] + 1
        return int(level.max()) + 1


def build_tree(points, leaf_capacity) -> Octree:
    points = np.asarray(points, dtype=float)
    if leaf_capacity < 1:
        raise ValueError("leaf capacity must be at least 1")
    perm = np.arange(len(points))
    lo, hi, start, stop, child_first, n_child = [], [], [], [], [], []

    def add(s, e):
        p = points[perm[s:e]]
        lo.append(p.min(axis=0))
        hi.append(p.max(axis=0))
        start.append(s)
        stop.append(e)
        child_first.append(0)
        n_child.append(0)

    add(0, len(points))
    c = 0
    while c < len(start):
        s, e = start[c], stop[c]
        extent = hi[c] - lo[c]
        split = extent > 0.0
        if e - s > leaf_capacity and np.any(split):
            mid = 0.5 * (lo[c] + hi[c])
            idx = perm[s:e]
            code = ((points[idx] > mid) & split).astype(np.int64) @ np.array([1, 2, 4])
            order = np.argsort(code, kind="stable")
            perm[s:e] = idx[order]
            counts = np.bincount(code, minlength=8)
            child_first[c] = len(start)
            offset = s
            for oct_count in counts:
                if oct_count:
                    add(offset, offset + oct_count)
                    offset += oct_count
            n_child[c] = len(start) - child_first[c]
        c += 1

    return Octree(
        perm,
        np.array(lo),
        np.array(hi),
        np.array(start, dtype=np.int64),
        np.array(stop, dtype=np.int64),
        np.array(child_first, dtype=np.int64),
        np.array(n_child, dtype=np.int64),
        int(leaf_capacity),
    )


def mac_accept(y, center, radius, theta):
    """Multipole acceptance ``r_c <= theta * R`` with ``R = |y - center|``."""
    big_r = np.linalg.norm(np.asarray(y, dtype=float) - center)
    return bool(radius <= theta * big_r)


def chebyshev_nodes(p):
    """Second-kind Chebyshev points ``cos(k pi / p)``, ``k = 0..p``."""
    return np.cos(np.pi * np.arange(p + 1) / p)


def _axis_nodes(lo, hi, p):
    return lo + 0.5 * (hi - lo) * (1.0 + chebyshev_nodes(p))


def chebyshev_grid(lo, hi, p):
    """Tensor grid of ``(p+1)**3`` points in the box, index ``k1, k2, k3``
    with ``k3`` fastest."""
    axes = [_axis_nodes(lo[a], hi[a], p) for a in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def lagrange_basis(x, lo, hi, p):
    """Barycentric Lagrange basis values ``L_k(x)``, shape ``(len(x), p+1)``.

    A zero-width interval carries everything on ``k = 0``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((len(x), p + 1))
    if hi <= lo:
        out[:, 0] = 1.0
        return out
    nodes = _axis_nodes(lo, hi, p)
    wts = (-1.0) ** np.arange(p + 1)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    diff = x[:, None] - nodes[None, :]
    hit = np.abs(diff) <= _NODE_TOL * (hi - lo)
    exact = np.any(hit, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = wts / diff
        out[:] = terms / terms.sum(axis=1, keepdims=True)
    if np.any(exact):
        rows = np.nonzero(exact)[0]
        out[rows] = 0.0
        out[rows, np.argmax(hit[rows], axis=1)] = 1.0
    return out


def modified_weights(tree: Octree, points, values, p):
    """Per-cluster modified weights, shape ``(n_nodes, (p+1)**3, C)``.

    ``points`` and ``values`` are in tree order (already permuted).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n_ch = values.shape[1]
    q = p + 1
    out = np.zeros((tree.n_nodes, q**3, n_ch))
    for c in range(tree.n_nodes):
        acc = np.zeros((q * n_ch, q * q))
        lo, hi = tree.lo[c], tree.hi[c]
        for s in range(tree.start[c], tree.stop[c], _CHUNK):
            e = min(s + _CHUNK, tree.stop[c])
            pts = points[s:e]
            l1 = lagrange_basis(pts[:, 0], lo[0], hi[0], p)
            l2 = lagrange_basis(pts[:, 1], lo[1], hi[1], p)
            l3 = lagrange_basis(pts[:, 2], lo[2], hi[2], p)
            t23 = (l2[:, :, None] * l3[:, None, :]).reshape(len(pts), q * q)
            a = (l1[:, :, None] * values[s:e, None, :]).reshape(len(pts), q * n_ch)
            acc += a.T @ t23
        out[c] = acc.reshape(q, n_ch, q * q).transpose(0, 2, 1).reshape(q**3, n_ch)
    return out


# -- traversal ---------------------------------------------------------------


@numba.njit(cache=True)
def _accept(y, center, radius, theta, min_gap):
    d0 = y[0] - center[0]
    d1 = y[1] - center[1]
    d2 = y[2] - center[2]
    big_r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    return theta > 0.0 and radius <= theta * big_r and big_r - radius > min_gap


@numba.njit(parallel=True, cache=True)
def _sl_traverse(y, alpha, x, fw, nw, deltas, sharp, theta, center, radius,
                 start, stop, child_first, n_child, grids, weights, near, far):
    min_gap = CUTOFF_RATIO * deltas.max()
    for i in numba.prange(y.shape[0]):
        stack = np.empty(_STACK, np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            c = stack[top]
            if _accept(y[i], center[c], radius[c], theta, min_gap):
                sl_far_approx(y[i], alpha[i], grids[c], weights[c], far[i])
            elif n_child[c] == 0:
                sl_accumulate(y[i], alpha[i], x, fw, nw, start[c], stop[c], deltas, sharp, near[i], far[i])
            else:
                for k in range(n_child[c] - 1, -1, -1):
                    stack[top] = child_first[c] + k
                    top += 1


@numba.njit(parallel=True, cache=True)
def _dl_traverse(y, x0, b, n0, q0, x, q, nw, deltas, sharp, theta, center, radius,
                 start, stop, child_first, n_child, grids, weights, near, far):
    min_gap = CUTOFF_RATIO * deltas.max()
    for i in numba.prange(y.shape[0]):
        stack = np.empty(_STACK, np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            c = stack[top]
            if _accept(y[i], center[c], radius[c], theta, min_gap):
                dl_far_approx(y[i], q0[i], grids[c], weights[c], far[i])
            elif n_child[c] == 0:
                dl_accumulate(y[i], x0[i], b[i], n0[i], q0[i], x, q, nw, start[c], stop[c],
                              deltas, sharp, near[i], far[i])
            else:
                for k in range(n_child[c] - 1, -1, -1):
                    stack[top] = child_first[c] + k
                    top += 1


@numba.njit(parallel=True, cache=True)
def _coverage(y, deltas, theta, center, radius, start, stop, child_first, n_child):
    """Per target: (points covered by accepted clusters, points summed
    directly, accepted clusters, leaves visited)."""
    min_gap = CUTOFF_RATIO * deltas.max()
    out = np.zeros((y.shape[0], 4), np.int64)
    for i in numba.prange(y.shape[0]):
        stack = np.empty(_STACK, np.int64)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            c = stack[top]
            if _accept(y[i], center[c], radius[c], theta, min_gap):
                out[i, 0] += stop[c] - start[c]
                out[i, 2] += 1
            elif n_child[c] == 0:
                out[i, 1] += stop[c] - start[c]
                out[i, 3] += 1
            else:
                for k in range(n_child[c] - 1, -1, -1):
                    stack[top] = child_first[c] + k
                    top += 1
    return out


@dataclass
class Treecode:
    """Tree, Chebyshev grids and cached normal-channel weights for one
    source point set."""

    points: np.ndarray
    normals_w: np.ndarray
    theta: float = 0.6
    leaf_capacity: int = 2000
    degree: int = 6
    tree: Octree = field(init=False)
    timings: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        t0 = time.perf_counter()
        self.tree = build_tree(self.points, self.leaf_capacity)
        perm = self.tree.perm
        self.x = np.ascontiguousarray(self.points[perm])
        self.nw = np.ascontiguousarray(self.normals_w[perm])
        self.grids = np.stack(
            [chebyshev_grid(self.tree.lo[c], self.tree.hi[c], self.degree) for c in range(self.tree.n_nodes)]
        )
        self.center = np.ascontiguousarray(self.tree.center)
        self.radius = np.ascontiguousarray(self.tree.radius)
        self.timings["build"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        self._nw_weights = modified_weights(self.tree, self.x, self.nw, self.degree)
        # one-off cost; "weights" is overwritten per call with the density channels
        self.timings["normal_weights"] = time.perf_counter() - t0

    def _tree_args(self):
        t = self.tree
        return (self.theta, self.center, self.radius, t.start, t.stop, t.child_first, t.n_child, self.grids)

    def single_layer(self, fw, y, alpha, deltas, sharp):
        t0 = time.perf_counter()
        fw = np.ascontiguousarray(np.asarray(fw, dtype=float)[self.tree.perm])
        w = np.concatenate([modified_weights(self.tree, self.x, fw, self.degree), self._nw_weights], axis=2)
        self.timings["weights"] = time.perf_counter() - t0
        near = np.zeros((len(y), len(deltas), 3))
        far = np.zeros((len(y), 3))
        t0 = time.perf_counter()
        _sl_traverse(y, alpha, self.x, fw, self.nw, deltas, sharp, *self._tree_args(), w, near, far)
        self.timings["eval"] = time.perf_counter() - t0
        return near, far

    def double_layer(self, q, y, x0, b, n0, q0, deltas, sharp):
        t0 = time.perf_counter()
        q = np.ascontiguousarray(np.asarray(q, dtype=float)[self.tree.perm])
        qnw = (q[:, :, None] * self.nw[:, None, :]).reshape(-1, 9)
        w = np.concatenate([modified_weights(self.tree, self.x, qnw, self.degree), self._nw_weights], axis=2)
        self.timings["weights"] = time.perf_counter() - t0
        near = np.zeros((len(y), len(deltas), 3))
        far = np.zeros((len(y), 3))
        t0 = time.perf_counter()
        _dl_traverse(y, x0, b, n0, q0, self.x, q, self.nw, deltas, sharp, *self._tree_args(), w, near, far)
        self.timings["eval"] = time.perf_counter() - t0
        return near, far

    def coverage(self, y, deltas):
        t = self.tree
        return _coverage(y, deltas, self.theta, self.center, self.radius, t.start, t.stop, t.child_first, t.n_child)
