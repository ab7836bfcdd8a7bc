"""Exception types shared across the package."""


class ReprocsError(Exception):
    """Base class for all package errors."""


class RankDeficientError(ReprocsError, ValueError):
    """A matrix that must have full column rank does not."""


class AsymmetricMatrixError(ReprocsError, ValueError):
    pass


class DegenerateInputError(ReprocsError, ValueError):
    """Input is zero (or numerically zero) where a nonzero value is required."""


class EnumerationTooLargeError(ReprocsError, ValueError):
    pass


class ConfigError(ReprocsError, ValueError):
    """Inconsistent configuration or schedule."""


class RegimeError(ReprocsError, ArithmeticError):
    """A bound formula left its valid regime (e.g. a nonpositive denominator)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SequencingError(ReprocsError, RuntimeError):
    """Internal bookkeeping guard: the tracker reached an impossible state."""
