import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stokes_near_eval.kernels import (
    KernelContext,
    Mode,
    _scaled,
    s_factors,
    s_sharp_factors,
    scaled_factors,
    stokeslet,
    stokeslet_regularized,
    stresslet_apply,
    stresslet_split_regularized,
    stresslet_split_terms,
)

# 50-digit mpmath evaluations of the closed forms
ORACLE = {
    0.25: (0.27632639016823693, 0.011322857824208372, 0.00028104397654051541,
           0.70695713022728334, 0.087235328026924887, 0.0007411195535266761),
    1.0: (0.84270079294971487, 0.42759329552912017, 0.15085496391539036,
          1.2578082903703096, 1.8112849535977692, 0.33534718499121023),
    2.5: (0.99959304798255504, 0.99414733740667327, 0.97145687667383254,
          0.98597877154285061, 0.86934980337604927, 1.0660004630606689),
}

vec3 = arrays(np.float64, 3, elements=st.floats(-2.0, 2.0, allow_nan=False, allow_subnormal=False))


@pytest.mark.parametrize("t", sorted(ORACLE))
def test_factors_match_oracle(t):
    got = np.concatenate([s_factors(t), s_sharp_factors(t)])
    np.testing.assert_allclose(got, ORACLE[t], rtol=2e-14)


def test_factors_vanish_at_zero():
    assert all(f == 0.0 for f in s_factors(0.0))
    assert all(f == 0.0 for f in s_sharp_factors(0.0))


def test_cutoff_sets_factors_to_one():
    assert all(f == 1.0 for f in s_factors(6.0 + 1e-12))
    assert all(f == 1.0 for f in s_sharp_factors(7.0))


def test_deficit_at_cutoff_is_negligible_after_scaling():
    # (1 - s_p)/t^(2p-1) is what a cutoff discards relative to the kernel
    s = s_factors(6.0)
    assert abs(1 - s[0]) <= 2.3e-16
    for p, sp in enumerate(s):
        assert (1 - sp) / 6.0 ** (2 * p + 1) < 1e-17


@given(st.floats(0.0, 6.0))
def test_scaled_series_matches_numba(t):
    for sharp in (False, True):
        a = _scaled(np.array([t]), int(sharp), 6.0)[:, 0]
        b = np.array(scaled_factors(t, sharp))
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)


@pytest.mark.parametrize("sharp", [0, 1])
def test_scaled_continuous_at_series_switch(sharp):
    lo = _scaled(np.array([1.0 - 1e-12]), sharp, 6.0)[:, 0]
    hi = _scaled(np.array([1.0]), sharp, 6.0)[:, 0]
    np.testing.assert_allclose(lo, hi, rtol=1e-11)


def test_scaled_limits_at_zero():
    g = _scaled(np.array([0.0]), 0, 6.0)[:, 0]
    c = 2 / math.sqrt(math.pi)
    # erf(t)/t -> c ; s2/t^3 -> 2c/3 ; s3/t^5 -> 4c/15
    np.testing.assert_allclose(g, [c, 2 * c / 3, 4 * c / 15], rtol=1e-15)


@given(vec3, vec3)
def test_stokeslet_symmetric(y, x):
    if np.linalg.norm(y - x) < 1e-3:
        return
    s = stokeslet(y, x)
    np.testing.assert_allclose(s, s.T, rtol=0, atol=0)
    np.testing.assert_allclose(s, stokeslet(x, y), rtol=1e-15)


def test_regularized_stokeslet_limits(rng):
    y = np.zeros(3)
    x = rng.normal(size=(100, 3))
    ctx = KernelContext(0.05)
    far = np.linalg.norm(x, axis=1) > 0.3
    np.testing.assert_array_equal(stokeslet_regularized(y, x[far], ctx), stokeslet(y, x[far]))
    out = stokeslet_regularized(y, np.zeros((1, 3)), ctx)
    c = 2 / math.sqrt(math.pi) / 0.05
    np.testing.assert_allclose(out[0], c * np.eye(3), rtol=1e-15)


def _triple_loop(y, x, q, n):
    d = y - x
    r = np.linalg.norm(d)
    out = np.zeros(3)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                out[i] += -6 * d[i] * d[j] * d[k] / r**5 * q[j] * n[k]
    return out


@given(vec3, vec3, vec3, vec3)
def test_stresslet_contraction(y, x, q, n):
    if np.linalg.norm(y - x) < 1e-2:
        return
    np.testing.assert_allclose(stresslet_apply(y, x, q, n), _triple_loop(y, x, q, n), rtol=1e-12, atol=1e-12)


@given(vec3, st.floats(-0.5, 0.5), vec3, vec3)
def test_split_stresslet_equals_raw(xh, b, q, n):
    n0 = np.array([0.0, 0.6, 0.8])
    x0 = np.array([0.1, -0.2, 0.3])
    x = x0 + xh
    y = x0 + b * n0
    if np.linalg.norm(y - x) < 0.05:
        return
    split = stresslet_split_regularized(y, x, x0, b, n0, q, n, KernelContext(1.0, mode=Mode.UNREGULARIZED))
    raw = stresslet_apply(y, x, q, n)
    r = np.linalg.norm(y - x)
    scale = 18 * np.abs(q).max() * np.abs(n).max() / r**2
    np.testing.assert_allclose(split, raw, rtol=0, atol=1e-12 * scale * (1 + np.linalg.norm(xh)) ** 3 + 1e-300)


def test_split_terms_identity(rng):
    # (y - x)^{(x)3} = b^2 t1 + t2 when y = x0 + b n0
    n0 = np.array([0.0, 0.0, 1.0])
    for _ in range(10):
        xh = rng.normal(size=3)
        b = rng.normal()
        t1, t2 = stresslet_split_terms(xh, np.zeros(3), b, n0)
        d = b * n0 - xh
        np.testing.assert_allclose(b * b * t1 + t2, np.einsum("i,j,k->ijk", d, d, d), atol=1e-12)


def test_regularized_stresslet_continuous_at_cutoff():
    # just inside the cutoff the regularized value differs from the plain one
    # only by the factor deficits 1 - s2(6), 1 - s3(6)
    n0 = np.array([0.0, 0.0, 1.0])
    x0 = np.zeros(3)
    delta, b = 0.1, 0.02
    y = x0 + b * n0
    x = y + np.array([0.6 - 1e-9, 0.0, 0.0])
    q, n = np.array([1.0, 0.5, -0.3]), np.array([0.2, 0.1, 0.97])
    ctx = KernelContext(delta)
    reg = stresslet_split_regularized(y, x, x0, b, n0, q, n, ctx)
    raw = stresslet_apply(y, x, q, n)
    t1, t2 = stresslet_split_terms(x, x0, b, n0)
    r = np.linalg.norm(y - x)
    c1 = np.einsum("ijk,j,k->i", t1, q, n)
    c2 = np.einsum("ijk,j,k->i", t2, q, n)
    rb = r * r - b * b
    s = s_factors(r / delta)
    bound = 6 * (np.abs(c1) / r**3 * (1 - s[1]) + np.abs(c2 - rb * c1) / r**5 * (1 - s[2]))
    assert np.all(np.abs(reg - raw) <= bound + 1e-15 * np.abs(raw).max())


def test_context_validation():
    with pytest.raises(ValueError):
        KernelContext(0.0)
    with pytest.raises(ValueError):
        KernelContext(0.1, cutoff_ratio=3.0)
