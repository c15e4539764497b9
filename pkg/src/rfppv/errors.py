"""Exception types raised across the package."""


class RFError(Exception):
    """Base class for every error raised by :mod:`rfppv`."""


class NonPositiveMuStar(RFError, ValueError):
    """The activation is (numerically) linear: mu_star^2 is not positive."""


class UnknownActivation(RFError, ValueError):
    pass


class NoConvergence(RFError, ArithmeticError):
    """Fixed-point iteration exhausted its budget.

    Attributes
    ----------
    residual : float
        Defect of the last iterate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class LeftUpperHalfPlane(RFError, ArithmeticError):
    """An iterate left the upper half plane; use more continuation steps."""


class NegativeRadicand(RFError, ValueError):
    pass


class DegenerateDenominator(RFError, ZeroDivisionError):
    pass


class PhaseViolation(RFError, ValueError):
    """The closed-form optimal ridge only exists below the SNR threshold."""


class FactorizationFailure(RFError, ArithmeticError):
    pass


class ZeroVector(RFError, ArithmeticError):
    pass


class BinMismatch(RFError, ValueError):
    pass


class ConfigError(RFError, ValueError):
    """Malformed or inconsistent run configuration."""
