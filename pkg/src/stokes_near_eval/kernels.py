"""Stokeslet and stresslet kernels, smoothing factors and regularized kernels.

Two layers live here:

* vectorized numpy functions used for reference evaluation and tests;
* ``numba`` pair-accumulation helpers used by the direct and treecode
  engines.  They share one code path so that the two engines produce the
  same bits when they visit sources in the same order.

The smoothing factors use ``math.erf`` (the platform libm ``erf``, accurate
to about one ulp).  For ``t < 1`` the scaled factors ``s(t) / t**p`` are
summed from their Taylor series, whose coefficients are generated exactly
with ``fractions.Fraction`` so that the vanishing low-order terms are exact
zeros and ``r = 0`` has a finite limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numba
import numpy as np
from scipy.special import erf

CUTOFF_RATIO = 6.0
TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

# s(t) = erf(t) + (2/sqrt(pi)) P(t) exp(-t^2); P odd, listed by t^(2k+1) coefficient
_POLYS = {
    "s1": [],
    "s2": [Fraction(-1)],
    "s3": [Fraction(-1), Fraction(-2, 3)],
    "s1_sharp": [Fraction(5, 3), Fraction(-2, 3)],
    "s2_sharp": [Fraction(-1), Fraction(14, 3), Fraction(-4, 3)],
    "s3_sharp": [Fraction(-1), Fraction(-2, 3), Fraction(4, 9)],
}
_N_SERIES = 24


def _series(poly, power):
    """Coefficients of ``s(t) / t**power / (2/sqrt(pi))`` in powers of ``t**2``."""
    coeffs = []
    for m in range(_N_SERIES + power):
        e = Fraction((-1) ** m, math.factorial(m) * (2 * m + 1))
        for k, p in enumerate(poly[: m + 1]):
            e += p * Fraction((-1) ** (m - k), math.factorial(m - k))
        if 2 * m + 1 < power:
            assert e == 0, "smoothing factor does not vanish to the required order"
            continue
        coeffs.append(e)
    return [float(c) for c in coeffs[:_N_SERIES]]


_SERIES = np.array(
    [
        [_series(_POLYS[f"s{p}{suffix}"], 2 * p - 1) for p in (1, 2, 3)]
        for suffix in ("", "_sharp")
    ]
)  # (mode, factor, term)
_POLY_TABLE = np.zeros((2, 3, 3))
for _mode, _suffix in enumerate(("", "_sharp")):
    for _p in range(3):
        _c = _POLYS[f"s{_p + 1}{_suffix}"]
        _POLY_TABLE[_mode, _p, : len(_c)] = [float(v) for v in _c]


class Mode(Enum):
    UNREGULARIZED = 0
    NEAR_SINGULAR = 1
    ON_SURFACE = 2


@dataclass(frozen=True)
class KernelContext:
    delta: float
    cutoff_ratio: float = CUTOFF_RATIO
    mode: Mode = Mode.NEAR_SINGULAR

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.cutoff_ratio < CUTOFF_RATIO:
            raise ValueError("cutoff_ratio must be at least 6")

    @property
    def sharp(self):
        return self.mode is Mode.ON_SURFACE


# -- smoothing factors -------------------------------------------------------


def _factors(t, mode, cutoff):
    t = np.asarray(t, dtype=float)
    et = np.exp(-t * t)
    out = []
    for p in range(3):
        poly = _POLY_TABLE[mode, p]
        tp = t * (poly[0] + t * t * (poly[1] + t * t * poly[2]))
        s = erf(t) + TWO_OVER_SQRT_PI * tp * et
        out.append(np.where(t > cutoff, 1.0, s))
    return tuple(out)


def _accurate(t, mode, cutoff):
    # the closed forms cancel badly for small t; use the series there
    t = np.asarray(t, dtype=float)
    direct = _factors(t, mode, cutoff)
    scaled = _scaled(np.minimum(t, 1.0), mode, cutoff)
    return tuple(np.where(t < 1.0, scaled[p] * t ** (2 * p + 1), direct[p]) for p in range(3))


def s_factors(t, cutoff=CUTOFF_RATIO):
    """``(s1, s2, s3)``; identically 1 beyond ``cutoff``."""
    return _accurate(t, 0, cutoff)


def s_sharp_factors(t, cutoff=CUTOFF_RATIO):
    """On-surface factors ``(s1#, s2#, s3#)``; identically 1 beyond ``cutoff``."""
    return _accurate(t, 1, cutoff)


# -- numpy reference kernels ------------------------------------------------


def stokeslet(y, x):
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.linalg.norm(d, axis=-1)[..., None, None]
    return np.eye(3) / r + d[..., :, None] * d[..., None, :] / r**3


def stresslet_apply(y, x, q, n):
    """``T_ijk q_j n_k`` with ``T_ijk = -6 d_i d_j d_k / r^5``."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.linalg.norm(d, axis=-1, keepdims=True)
    dq = np.sum(d * q, axis=-1, keepdims=True)
    dn = np.sum(d * n, axis=-1, keepdims=True)
    return -6.0 * d * dq * dn / r**5


def _scaled(t, mode_index, cutoff):
    """Vectorized ``s_p(t) / t**(2p-1)`` for p = 1, 2, 3 (``t <= cutoff``)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((3,) + t.shape)
    small = t < 1.0
    u = t * t
    for p in range(3):
        c = _SERIES[mode_index, p]
        acc = np.zeros_like(t)
        for coef in c[::-1]:
            acc = acc * u + coef
        series = TWO_OVER_SQRT_PI * acc
        with np.errstate(divide="ignore", invalid="ignore"):
            s = _factors(t, mode_index, np.inf)[p]
            direct = s / t ** (2 * p + 1)
        out[p] = np.where(small, series, direct)
    return out


def stokeslet_regularized(y, x, ctx: KernelContext):
    if ctx.mode is Mode.UNREGULARIZED:
        return stokeslet(y, x)
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    t = np.linalg.norm(d, axis=-1) / ctx.delta
    g1, g2, _ = _scaled(t, int(ctx.sharp), ctx.cutoff_ratio)
    reg = (
        np.eye(3) * (g1 / ctx.delta)[..., None, None]
        + d[..., :, None] * d[..., None, :] * (g2 / ctx.delta**3)[..., None, None]
    )
    far = t > ctx.cutoff_ratio
    if np.any(far):
        with np.errstate(divide="ignore", invalid="ignore"):
            reg = np.where(far[..., None, None], stokeslet(y, x), reg)
    return reg


def stresslet_split_terms(x, x0, b, n0):
    """Rank-3 arrays ``t1_ijk``, ``t2_ijk`` of the split stresslet."""
    xh = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
    n = np.broadcast_to(np.asarray(n0, dtype=float), xh.shape)
    b = np.asarray(b, dtype=float)[..., None, None, None]

    def outer(a, c, e):
        return a[..., :, None, None] * c[..., None, :, None] * e[..., None, None, :]

    t1 = b * outer(n, n, n) - (outer(xh, n, n) + outer(n, xh, n) + outer(n, n, xh))
    t2 = b * (outer(xh, xh, n) + outer(xh, n, xh) + outer(n, xh, xh)) - outer(xh, xh, xh)
    return t1, t2


def stresslet_split_regularized(y, x, x0, b, n0, q, n, ctx: KernelContext):
    """``T^delta_ijk q_j n_k`` via the split ``T1 s2 + T2 s3``.

    ``x0, b, n0`` are the target's closest-point data, with
    ``y = x0 + b n0``.  In on-surface mode both parts take ``s3#``: the
    pairing ``T1 s2# + T2 s3#`` leaves an O(delta) error at ``b = 0``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(y - x, axis=-1)
    t1, t2 = stresslet_split_terms(x, x0, b, n0)
    xh = x - np.asarray(x0, dtype=float)
    rb = np.sum(xh * xh, axis=-1) - 2.0 * np.asarray(b) * np.sum(xh * n0, axis=-1)
    c1 = np.einsum("...ijk,...j,...k->...i", t1, q, n)
    c2 = np.einsum("...ijk,...j,...k->...i", t2, q, n)
    if ctx.mode is Mode.UNREGULARIZED:
        k2, k3 = 1.0 / r**3, 1.0 / r**5
    else:
        t = r / ctx.delta
        _, g2, g3 = _scaled(t, int(ctx.sharp), ctx.cutoff_ratio)
        if ctx.sharp:
            g2 = g3 * t * t
        k2, k3 = g2 / ctx.delta**3, g3 / ctx.delta**5
    out = -6.0 * (c1 * k2[..., None] + (c2 - rb[..., None] * c1) * k3[..., None])
    if ctx.mode is not Mode.UNREGULARIZED:
        far = r / ctx.delta > ctx.cutoff_ratio
        if np.any(far):
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(far[..., None], stresslet_apply(y, x, q, n), out)
    return out


# -- numba pair helpers -----------------------------------------------------


@numba.njit(cache=True)
def scaled_factors(t, sharp):
    """``(s1/t, s2/t^3, s3/t^5)`` for ``0 <= t <= cutoff``."""
    mode = 1 if sharp else 0
    if t < 1.0:
        u = t * t
        g1 = 0.0
        g2 = 0.0
        g3 = 0.0
        for k in range(_N_SERIES - 1, -1, -1):
            g1 = g1 * u + _SERIES[mode, 0, k]
            g2 = g2 * u + _SERIES[mode, 1, k]
            g3 = g3 * u + _SERIES[mode, 2, k]
        return TWO_OVER_SQRT_PI * g1, TWO_OVER_SQRT_PI * g2, TWO_OVER_SQRT_PI * g3
    e = math.erf(t)
    env = TWO_OVER_SQRT_PI * math.exp(-t * t)
    u = t * t
    out1 = 0.0
    out2 = 0.0
    out3 = 0.0
    for p in range(3):
        c = _POLY_TABLE[mode, p]
        s = e + env * t * (c[0] + u * (c[1] + u * c[2]))
        if p == 0:
            out1 = s / t
        elif p == 1:
            out2 = s / (t * u)
        else:
            out3 = s / (t * u * u)
    return out1, out2, out3


@numba.njit(cache=True)
def sl_accumulate(y, alpha, x, fw, nw, start, stop, deltas, sharp, near, far):
    """Subtracted single-layer sum over sources ``start:stop``.

    The weighted density is ``fw - alpha * nw``.  Pairs with
    ``r > 6 * max(deltas)`` go to ``far`` (unregularized, shared by all
    deltas); the rest to ``near[i]`` with delta ``deltas[i]``.
    """
    nd = deltas.shape[0]
    dmax = 0.0
    for i in range(nd):
        dmax = max(dmax, deltas[i])
    cut2 = (CUTOFF_RATIO * dmax) ** 2
    y0, y1, y2 = y[0], y[1], y[2]
    f0, f1, f2 = far[0], far[1], far[2]
    for j in range(start, stop):
        d0 = y0 - x[j, 0]
        d1 = y1 - x[j, 1]
        d2 = y2 - x[j, 2]
        r2 = d0 * d0 + d1 * d1 + d2 * d2
        g0 = fw[j, 0] - alpha * nw[j, 0]
        g1 = fw[j, 1] - alpha * nw[j, 1]
        g2 = fw[j, 2] - alpha * nw[j, 2]
        dg = d0 * g0 + d1 * g1 + d2 * g2
        if r2 > cut2:
            ir = 1.0 / math.sqrt(r2)
            ir3 = ir * ir * ir
            c = dg * ir3
            f0 += g0 * ir + d0 * c
            f1 += g1 * ir + d1 * c
            f2 += g2 * ir + d2 * c
        else:
            r = math.sqrt(r2)
            for i in range(nd):
                t = r / deltas[i]
                if t > CUTOFF_RATIO:
                    a = 1.0 / math.sqrt(r2)
                    c = dg * (a * a * a)
                else:
                    s1, s2, _ = scaled_factors(t, sharp)
                    a = s1 / deltas[i]
                    c = dg * (s2 / deltas[i] ** 3)
                near[i, 0] += g0 * a + d0 * c
                near[i, 1] += g1 * a + d1 * c
                near[i, 2] += g2 * a + d2 * c
    far[0], far[1], far[2] = f0, f1, f2


@numba.njit(cache=True)
def dl_accumulate(y, x0, b, n0, q0, x, q, nw, start, stop, deltas, sharp, near, far):
    """Subtracted double-layer sum over sources ``start:stop``.

    Density ``q - q0`` against the weighted source normals ``nw``.  Far
    pairs use the raw stresslet, near pairs the split form built from the
    target data ``x0, b, n0``.
    """
    nd = deltas.shape[0]
    dmax = 0.0
    for i in range(nd):
        dmax = max(dmax, deltas[i])
    cut2 = (CUTOFF_RATIO * dmax) ** 2
    n00, n01, n02 = n0[0], n0[1], n0[2]
    f0, f1, f2 = far[0], far[1], far[2]
    for j in range(start, stop):
        d0 = y[0] - x[j, 0]
        d1 = y[1] - x[j, 1]
        d2 = y[2] - x[j, 2]
        r2 = d0 * d0 + d1 * d1 + d2 * d2
        e0 = q[j, 0] - q0[0]
        e1 = q[j, 1] - q0[1]
        e2 = q[j, 2] - q0[2]
        m0 = nw[j, 0]
        m1 = nw[j, 1]
        m2 = nw[j, 2]
        if r2 > cut2:
            ir = 1.0 / math.sqrt(r2)
            ir2 = ir * ir
            c = -6.0 * (d0 * e0 + d1 * e1 + d2 * e2) * (d0 * m0 + d1 * m1 + d2 * m2) * (ir2 * ir2 * ir)
            f0 += c * d0
            f1 += c * d1
            f2 += c * d2
            continue
        xh0 = x[j, 0] - x0[0]
        xh1 = x[j, 1] - x0[1]
        xh2 = x[j, 2] - x0[2]
        nq = n00 * e0 + n01 * e1 + n02 * e2
        nm = n00 * m0 + n01 * m1 + n02 * m2
        xq = xh0 * e0 + xh1 * e1 + xh2 * e2
        xm = xh0 * m0 + xh1 * m1 + xh2 * m2
        mix = xq * nm + nq * xm
        # t1_ijk e_j m_k and t2_ijk e_j m_k
        a1 = b * nq * nm - mix
        u0 = a1 * n00 - nq * nm * xh0
        u1 = a1 * n01 - nq * nm * xh1
        u2 = a1 * n02 - nq * nm * xh2
        bm = b * mix - xq * xm
        bx = b * xq * xm
        w0 = bm * xh0 + bx * n00
        w1 = bm * xh1 + bx * n01
        w2 = bm * xh2 + bx * n02
        rb = xh0 * xh0 + xh1 * xh1 + xh2 * xh2 - 2.0 * b * (n00 * xh0 + n01 * xh1 + n02 * xh2)
        r = math.sqrt(r2)
        for i in range(nd):
            t = r / deltas[i]
            if t > CUTOFF_RATIO:
                ir = 1.0 / math.sqrt(r2)
                ir2 = ir * ir
                c = -6.0 * (d0 * e0 + d1 * e1 + d2 * e2) * (d0 * m0 + d1 * m1 + d2 * m2) * (ir2 * ir2 * ir)
                near[i, 0] += c * d0
                near[i, 1] += c * d1
                near[i, 2] += c * d2
            else:
                _, s2, s3 = scaled_factors(t, sharp)
                if sharp:
                    s2 = s3 * t * t
                k2 = -6.0 * s2 / deltas[i] ** 3
                k3 = -6.0 * s3 / deltas[i] ** 5
                near[i, 0] += k2 * u0 + k3 * (w0 - rb * u0)
                near[i, 1] += k2 * u1 + k3 * (w1 - rb * u1)
                near[i, 2] += k2 * u2 + k3 * (w2 - rb * u2)
    far[0], far[1], far[2] = f0, f1, f2


@numba.njit(cache=True)
def sl_far_approx(y, alpha, nodes, weights, far):
    """Unregularized Stokeslet against modified weights ``(P, 6)``:
    channels ``f_j w`` then ``n_j w``."""
    a0, a1, a2 = 0.0, 0.0, 0.0
    y0, y1, y2 = y[0], y[1], y[2]
    for k in range(nodes.shape[0]):
        d0 = y0 - nodes[k, 0]
        d1 = y1 - nodes[k, 1]
        d2 = y2 - nodes[k, 2]
        r2 = d0 * d0 + d1 * d1 + d2 * d2
        g0 = weights[k, 0] - alpha * weights[k, 3]
        g1 = weights[k, 1] - alpha * weights[k, 4]
        g2 = weights[k, 2] - alpha * weights[k, 5]
        ir = 1.0 / math.sqrt(r2)
        c = (d0 * g0 + d1 * g1 + d2 * g2) * ir * ir * ir
        a0 += g0 * ir + d0 * c
        a1 += g1 * ir + d1 * c
        a2 += g2 * ir + d2 * c
    far[0] += a0
    far[1] += a1
    far[2] += a2


@numba.njit(cache=True)
def dl_far_approx(y, q0, nodes, weights, far):
    """Unregularized stresslet against modified weights ``(P, 12)``:
    channels ``q_j n_k w`` (index ``3j + k``) then ``n_k w``."""
    a0, a1, a2 = 0.0, 0.0, 0.0
    y0, y1, y2 = y[0], y[1], y[2]
    p0, p1, p2 = q0[0], q0[1], q0[2]
    for k in range(nodes.shape[0]):
        d0 = y0 - nodes[k, 0]
        d1 = y1 - nodes[k, 1]
        d2 = y2 - nodes[k, 2]
        r2 = d0 * d0 + d1 * d1 + d2 * d2
        m0 = d0 * weights[k, 9] + d1 * weights[k, 10] + d2 * weights[k, 11]
        dmd = (
            d0 * (d0 * weights[k, 0] + d1 * weights[k, 1] + d2 * weights[k, 2] - p0 * m0)
            + d1 * (d0 * weights[k, 3] + d1 * weights[k, 4] + d2 * weights[k, 5] - p1 * m0)
            + d2 * (d0 * weights[k, 6] + d1 * weights[k, 7] + d2 * weights[k, 8] - p2 * m0)
        )
        ir = 1.0 / math.sqrt(r2)
        ir2 = ir * ir
        c = -6.0 * dmd * ir2 * ir2 * ir
        a0 += c * d0
        a1 += c * d1
        a2 += c * d2
    far[0] += a0
    far[1] += a1
    far[2] += a2
