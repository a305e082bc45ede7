"""Exception types shared across the package."""


class TanhomError(Exception):
    """Base class for all package-specific errors."""


class DegeneratePoint(TanhomError):
    """A point left the region where the nearest-point projection is defined."""


class InvalidProfile(TanhomError):
    """A step profile has non-positive values or ill-ordered breakpoints."""


class UnsupportedGrowth(TanhomError):
    """An operation requires a different growth exponent than the integrand declares."""


class HypothesisViolated(TanhomError):
    """A sampled structural check (periodicity, growth, Lipschitz) failed.

    Carries the offending sample in ``sample`` as a ``(y, xi)`` pair when available.
    """

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class GrowthViolation(TanhomError):
    """A computed homogenized value escaped its declared growth sandwich."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class NotTangent(TanhomError):
    """A matrix argument is not tangent at the given base point."""


class UnsupportedSolver(TanhomError):
    """The requested solver cannot handle the given integrand."""


class UnsupportedBoundary(TanhomError):
    """The operation requires a different boundary condition."""


class ShapeMismatch(TanhomError):
    """Array shapes disagree with the problem specification."""


class ConfigError(TanhomError):
    """A run configuration is malformed."""
