"""Exception types shared across the package."""


class NpboError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(NpboError, ValueError):
    """Inconsistent grid, sizes or experiment settings."""


class DomainError(NpboError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class NumericError(NpboError, ArithmeticError):
    """Non-finite values produced or supplied."""


class HorizonTooLargeError(NpboError):
    """Picard iteration failed to contract on the requested horizon."""

    def __init__(self, message, ratio=None, horizon=None):
        super().__init__(message)
        self.ratio = ratio
        self.horizon = horizon


class InstabilityError(NumericError):
    """A time stepper produced NaN or overflow."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InvalidRunError(NpboError):
    """A diagnostic run is contaminated (e.g. by the periodic boundary)."""
