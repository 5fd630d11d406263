"""Exception types shared across the package."""


class FracError(Exception):
    """Base class for all library errors."""


class DomainError(FracError, ValueError):
    """A point or parameter lies outside the region where a quantity is defined."""


class ConvergenceError(FracError, RuntimeError):
    """A numerical procedure failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IllConditionedError(FracError, ArithmeticError):
    """A quotient or linear program is too poorly conditioned to report."""


class StatisticalQualityError(FracError, RuntimeError):
    """A Monte Carlo estimate does not meet its quality requirements."""
