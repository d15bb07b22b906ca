"""Implicit closed surfaces: the prolate spheroid benchmark and spheres.

Every surface is the zero set of a level function ``phi`` with ``phi < 0``
inside.  All methods are vectorized over leading axes; points are arrays of
shape ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, ZeroGradient

PROJECTION_TOL = 1e-12
PROJECTION_MAX_ITER = 50


@dataclass(frozen=True)
class ClosestPointResult:
    """Closest surface point ``x0``, signed distance ``b`` (> 0 outside) and
    outward normal ``n0``, so that ``y = x0 + b * n0``."""

    x0: np.ndarray
    b: np.ndarray
    n0: np.ndarray


class ImplicitSurface:
    """Axis-aligned quadric ``phi(x) = sum_i k_i (x_i - c_i)^2 - s``."""

    center: np.ndarray
    _k: np.ndarray
    _s: float

    def level_value(self, y):
        d = np.asarray(y, dtype=float) - self.center
        return np.sum(self._k * d * d, axis=-1) - self._s

    def gradient(self, y):
        return 2.0 * self._k * (np.asarray(y, dtype=float) - self.center)

    def hessian(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1] + (3, 3))
        out[..., [0, 1, 2], [0, 1, 2]] = 2.0 * self._k
        return out

    def bounds(self):
        half = np.sqrt(self._s / self._k)
        return self.center - half, self.center + half

    def normal(self, x):
        g = self.gradient(x)
        mag = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.any(mag < 1e-14):
            raise ZeroGradient("level-set gradient vanishes at a surface point")
        return g / mag

    def closest_point(self, y) -> ClosestPointResult:
        """Newton iteration on ``x - y + mu grad phi(x) = 0, phi(x) = 0``.

        The starting guess is the first-order projection of ``y`` along
        ``grad phi(y)``.
        """
        y = np.atleast_2d(np.asarray(y, dtype=float))
        g = self.gradient(y)
        g2 = np.sum(g * g, axis=-1)
        phi = self.level_value(y)
        x = y - (phi / g2)[:, None] * g
        mu = phi / g2
        for _ in range(PROJECTION_MAX_ITER):
            gx = self.gradient(x)
            res = np.concatenate([x - y + mu[:, None] * gx, self.level_value(x)[:, None]], axis=1)
            jac = np.zeros((len(y), 4, 4))
            jac[:, :3, :3] = np.eye(3) + mu[:, None, None] * self.hessian(x)
            jac[:, :3, 3] = gx
            jac[:, 3, :3] = gx
            step = np.linalg.solve(jac, -res[..., None])[..., 0]
            x = x + step[:, :3]
            mu = mu + step[:, 3]
            if np.max(np.abs(step[:, :3]), initial=0.0) <= PROJECTION_TOL:
                break
        else:
            raise NoConvergence("closest-point projection did not converge")
        n0 = self.normal(x)
        b = np.sum((y - x) * n0, axis=-1)
        return ClosestPointResult(x, b, n0)

    def mean_curvature(self, x):
        """``H = (kappa_1 + kappa_2) / 2``, positive for a sphere."""
        g = self.gradient(x)
        hs = self.hessian(x)
        g2 = np.sum(g * g, axis=-1)
        trace = np.trace(hs, axis1=-2, axis2=-1)
        ghg = np.einsum("...i,...ij,...j->...", g, hs, g)
        return (g2 * trace - ghg) / (2.0 * g2**1.5)

    def surface_gradient(self, gamma_grad, x):
        """Tangential part ``(I - n n^T) grad gamma`` of an ambient gradient.

        ``gamma_grad`` is either a callable returning the ambient gradient at
        ``x`` or the gradient values themselves.
        """
        grad = gamma_grad(x) if callable(gamma_grad) else np.asarray(gamma_grad, dtype=float)
        n = self.normal(x)
        return grad - np.sum(grad * n, axis=-1, keepdims=True) * n


@dataclass(frozen=True)
class Spheroid(ImplicitSurface):
    """Ellipsoid centred at the origin, ``sum (x_i / a_i)^2 = 1``."""

    semi_axes: tuple = (1.0, 0.5, 0.5)
    center: np.ndarray = field(default_factory=lambda: np.zeros(3), compare=False)

    def __post_init__(self):
        a = np.asarray(self.semi_axes, dtype=float)
        object.__setattr__(self, "_k", 1.0 / a**2)
        object.__setattr__(self, "_s", 1.0)


@dataclass(frozen=True)
class Sphere(ImplicitSurface):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "_k", np.ones(3))
        object.__setattr__(self, "_s", float(self.radius) ** 2)

    def __hash__(self):
        return hash((tuple(self.center), self.radius))

    def __eq__(self, other):
        return (
            isinstance(other, Sphere)
            and np.array_equal(self.center, other.center)
            and self.radius == other.radius
        )

    def normal(self, x):
        d = np.asarray(x, dtype=float) - self.center
        mag = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(mag < 1e-14):
            raise ZeroGradient("normal requested at the sphere centre")
        return d / mag

    def closest_point(self, y) -> ClosestPointResult:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        d = y - self.center
        dist = np.linalg.norm(d, axis=-1)
        if np.any(dist == 0.0):
            raise ZeroGradient("projection of the sphere centre is not unique")
        n0 = d / dist[:, None]
        return ClosestPointResult(self.center + self.radius * n0, dist - self.radius, n0)

    def mean_curvature(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], 1.0 / self.radius)
