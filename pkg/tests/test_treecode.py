import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stokes_near_eval.kernels import sl_far_approx, stokeslet
from stokes_near_eval.layer_eval import DeltaSchedule, DirectEngine, _dl_direct, _sl_direct
from stokes_near_eval.treecode import (
    Treecode,
    build_tree,
    chebyshev_grid,
    chebyshev_nodes,
    lagrange_basis,
    mac_accept,
    modified_weights,
)


def _leaf_sets(tree):
    return [set(tree.perm[tree.start[c]:tree.stop[c]]) for c in tree.leaves]


@given(st.integers(1, 300), st.integers(1, 40), st.integers(0, 2**31))
def test_tree_partitions_points(n, cap, seed):
    pts = np.random.default_rng(seed).random((n, 3))
    tree = build_tree(pts, cap)
    leaves = _leaf_sets(tree)
    assert sum(len(s) for s in leaves) == n
    assert set().union(*leaves) == set(range(n))
    for c in tree.leaves:
        assert tree.stop[c] - tree.start[c] <= cap or np.all(tree.hi[c] == tree.lo[c])
    # boxes are tight around their members
    for c in range(tree.n_nodes):
        p = pts[tree.perm[tree.start[c]:tree.stop[c]]]
        np.testing.assert_array_equal(p.min(0), tree.lo[c])
        np.testing.assert_array_equal(p.max(0), tree.hi[c])


def test_duplicate_points_terminate():
    tree = build_tree(np.ones((50, 3)), 4)
    assert tree.n_nodes == 1 and tree.radius[0] == 0.0


def test_single_point_tree():
    tree = build_tree(np.zeros((1, 3)), 10)
    assert tree.n_nodes == 1 and tree.radius[0] == 0.0


def test_spheroid_tree_depth(spheroid_qs32):
    tree = build_tree(spheroid_qs32.x, 2000)
    assert tree.depth() >= 2
    assert max(tree.stop[c] - tree.start[c] for c in tree.leaves) <= 2000


@pytest.mark.parametrize("rc,R,ok", [(0.5, 1.0, True), (0.7, 1.0, False), (0.0, 0.3, True)])
def test_mac(rc, R, ok):
    assert mac_accept(np.array([R, 0, 0]), np.zeros(3), rc, 0.6) is ok


def test_mac_zero_distance():
    assert not mac_accept(np.zeros(3), np.zeros(3), 0.1, 0.6)


def test_chebyshev_grid():
    grid = chebyshev_grid(np.zeros(3), np.ones(3), 1)
    assert len(grid) == 8 and set(map(tuple, grid)) == {(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)}
    np.testing.assert_allclose(chebyshev_nodes(2), [1, 0, -1], atol=1e-16)


@given(st.integers(1, 12), st.floats(-3, 3), st.floats(0.01, 2))
def test_lagrange_partition_of_unity(p, lo, width):
    x = np.linspace(lo, lo + width, 17)
    L = lagrange_basis(x, lo, lo + width, p)
    np.testing.assert_allclose(L.sum(axis=1), 1.0, atol=1e-12)


def test_lagrange_cardinality():
    nodes = 0.5 * (1 + chebyshev_nodes(6))
    L = lagrange_basis(nodes, 0.0, 1.0, 6)
    np.testing.assert_array_equal(L, np.eye(7))


def test_modified_weights_single_source():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 0.0, 1.0]])
    tree = build_tree(pts, 10)
    grid = chebyshev_grid(tree.lo[0], tree.hi[0], 3)
    m = int(np.argmin(np.linalg.norm(grid - pts[2], axis=1)))
    vals = np.zeros((3, 1))
    vals[2] = 1.0
    w = modified_weights(tree, pts[tree.perm], vals[tree.perm], 3)[0, :, 0]
    expect = np.zeros(64)
    expect[m] = 1.0
    np.testing.assert_allclose(w, expect, atol=1e-15)


def test_modified_weights_sum(rng):
    pts, g = rng.random((500, 3)), rng.normal(size=(500, 2))
    tree = build_tree(pts, 60)
    w = modified_weights(tree, pts[tree.perm], g[tree.perm], 5)
    np.testing.assert_allclose(w.sum(axis=1), [g[tree.perm[tree.start[c]:tree.stop[c]]].sum(0)
                                              for c in range(tree.n_nodes)], rtol=1e-11, atol=1e-11)
    assert np.all(modified_weights(tree, pts[tree.perm], np.zeros((500, 1)), 5) == 0)


@pytest.mark.parametrize("p", [2, 4, 7])
def test_polynomial_kernel_exact(p, rng):
    pts, g = rng.random((400, 3)), rng.normal(size=400)
    tree = build_tree(pts, 400)
    w = modified_weights(tree, pts[tree.perm], g[tree.perm], p)[0, :, 0]
    grid = chebyshev_grid(tree.lo[0], tree.hi[0], p)
    y = np.array([3.0, -1.0, 2.0])
    kern = lambda x: (x[:, 0] - y[0]) ** p * (x[:, 1] + 0.3) ** (p - 1) * (x[:, 2] - y[2]) ** 2
    direct = np.sum(kern(pts) * g)
    approx = np.sum(kern(grid) * w)
    assert abs(approx - direct) <= 1e-12 * np.sum(np.abs(kern(pts) * g))


@pytest.mark.parametrize("direction", [(1, 0, 0), (1, 1, 1), (1, 0.3, -0.2)])
def test_far_stokeslet_accuracy(direction, rng):
    # target on the acceptance boundary r_c = 0.6 R, degree 8
    pts = rng.random((300, 3)) * 0.4
    tree = build_tree(pts, 300)
    p, alpha = 8, 0.7
    grid = chebyshev_grid(tree.lo[0], tree.hi[0], p)
    d = np.asarray(direction, float) / np.linalg.norm(direction)
    y = tree.center[0] + d * tree.radius[0] / 0.6
    K = stokeslet(y, pts)
    for fw, nw, signed in ((rng.random((300, 3)), np.zeros((300, 3)), False),
                           (rng.normal(size=(300, 3)), rng.normal(size=(300, 3)), True)):
        w = np.concatenate([modified_weights(tree, pts, fw, p), modified_weights(tree, pts, nw, p)], axis=2)[0]
        far = np.zeros(3)
        sl_far_approx(y, alpha, grid, w, far)
        g = fw - alpha * nw
        exact = np.einsum("mij,mj->i", K, g)
        # signed densities cancel in the sum itself, so scale by sum |K||g|
        scale = np.einsum("mij,mj->i", np.abs(K), np.abs(g)).max() if signed else np.abs(exact).max()
        assert np.abs(far - exact).max() <= 1e-6 * scale


def test_theta_zero_is_direct_bitwise(spheroid_qs32, spheroid_targets32):
    qs, tg = spheroid_qs32, spheroid_targets32
    sel = slice(0, None, 11)
    y, x0, b, n0 = (np.ascontiguousarray(a[sel]) for a in (tg.y, tg.x0, tg.b, tg.n0))
    tc = Treecode(qs.x, qs.n * qs.w[:, None], theta=0.0, leaf_capacity=300, degree=4)
    deltas = DeltaSchedule(qs.h).deltas
    f = np.stack([1 + qs.x[:, 0], qs.x[:, 2], np.ones(len(qs))], 1)
    fw = f * qs.w[:, None]
    alpha = np.ones(len(y))
    near_t, far_t = tc.single_layer(fw, y, alpha, deltas, False)
    near_d, far_d = np.zeros_like(near_t), np.zeros_like(far_t)
    _sl_direct(y, alpha, tc.x, np.ascontiguousarray(fw[tc.tree.perm]), tc.nw, deltas, False, near_d, far_d)
    np.testing.assert_array_equal(near_t, near_d)
    np.testing.assert_array_equal(far_t, far_d)

    q0 = np.tile([0.2, 0.1, 0.0], (len(y), 1))
    near_t, far_t = tc.double_layer(f, y, x0, b, n0, q0, deltas, False)
    near_d, far_d = np.zeros_like(near_t), np.zeros_like(far_t)
    _dl_direct(y, x0, b, n0, q0, tc.x, np.ascontiguousarray(f[tc.tree.perm]), tc.nw, deltas, False, near_d, far_d)
    np.testing.assert_array_equal(near_t, near_d)
    np.testing.assert_array_equal(far_t, far_d)


def test_single_leaf_equals_direct(sphere_qs16):
    qs = sphere_qs16
    y = np.ascontiguousarray(qs.x[::50] * 1.02)
    tc = Treecode(qs.x, qs.n * qs.w[:, None], theta=0.6, leaf_capacity=len(qs), degree=4)
    fw = np.ascontiguousarray(np.tile([1.0, 2.0, 3.0], (len(qs), 1)) * qs.w[:, None])
    deltas = np.array([3 / 16])
    alpha = np.zeros(len(y))
    got = tc.single_layer(fw, y, alpha, deltas, False)
    ref = DirectEngine().single_layer(qs, fw, y, alpha, deltas, False)
    np.testing.assert_array_equal(got[0], ref[0])
    np.testing.assert_array_equal(got[1], ref[1])


def test_coverage_counts_every_point_once(spheroid_qs32, spheroid_targets32):
    qs = spheroid_qs32
    tc = Treecode(qs.x, qs.n * qs.w[:, None], 0.6, 500, 6)
    cov = tc.coverage(np.ascontiguousarray(spheroid_targets32.y[::5]), DeltaSchedule(qs.h).deltas)
    np.testing.assert_array_equal(cov[:, 0] + cov[:, 1], len(qs))
    assert cov[:, 2].max() > 0
