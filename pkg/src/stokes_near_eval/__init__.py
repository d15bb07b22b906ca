"""Near-surface evaluation of Stokes single and double layer potentials.

Regularized kernels with three-delta extrapolation, localized so that only
near pairs are regularized, and accelerated by a barycentric-Lagrange
treecode.
"""

from .errors import ConfigError, NumericalFailure
from .geometry import Sphere, Spheroid
from .layer_eval import DeltaSchedule, DirectEngine, TreecodeEngine, evaluate_velocity, evaluate_velocity_on_surface
from .quadrature import Targets, build_quadrature, generate_targets

__all__ = [
    "ConfigError",
    "NumericalFailure",
    "Sphere",
    "Spheroid",
    "DeltaSchedule",
    "DirectEngine",
    "TreecodeEngine",
    "evaluate_velocity",
    "evaluate_velocity_on_surface",
    "Targets",
    "build_quadrature",
    "generate_targets",
]

__version__ = "0.1.0"
