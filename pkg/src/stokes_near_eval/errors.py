"""Exception hierarchy.

``NumericalFailure`` subclasses map to CLI exit code 3, ``ConfigError`` to 2.
"""


class StokesNearEvalError(Exception):
    pass


class ConfigError(StokesNearEvalError, ValueError):
    pass


class NumericalFailure(StokesNearEvalError, ArithmeticError):
    pass


class ZeroGradient(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class RootFindingFailure(NumericalFailure):
    pass


class DegenerateNormal(NumericalFailure):
    pass


class SingularSystem(NumericalFailure):
    pass


class CalibrationFailure(NumericalFailure):
    pass


class MissingPoint(NumericalFailure):
    pass


class MaxIterationsExceeded(NumericalFailure):
    """GMRES stopped before reaching the tolerance.

    The best iterate and the residual history are attached so callers can
    still inspect them.
    """

    def __init__(self, message, x=None, residuals=None):
        super().__init__(message)
        self.x = x
        self.residuals = residuals
