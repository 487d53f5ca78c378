"""Exception types raised across the package."""


class KfSpoofError(Exception):
    """Base class for all package errors."""


class DimensionError(KfSpoofError, ValueError):
    pass


class SingularMatrixError(KfSpoofError, ArithmeticError):
    pass


class LpStalled(KfSpoofError, RuntimeError):
    """Simplex exceeded its iteration cap."""


class NoConstraints(KfSpoofError, ValueError):
    """Every desired separation is zero."""


class UnreachableSeparation(KfSpoofError, ValueError):
    """No LP instance admits the requested separation profile."""


class EnumerationCapExceeded(KfSpoofError, ValueError):
    pass


class InfeasibleWindow(KfSpoofError, ValueError):
    """Online window problem has no solution.

    ``achievable`` holds the largest separation reachable at each window step.
    """

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class CalibrationError(KfSpoofError, ValueError):
    """Target false-alarm rate is not reached anywhere on the threshold grid."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve
