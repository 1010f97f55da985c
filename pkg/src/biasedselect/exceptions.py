"""Exception types raised across the package."""


class BiasedSelectError(Exception):
    """Base class for all package errors."""


class ValidationError(BiasedSelectError, ValueError):
    """An argument violates a documented precondition."""


class InfeasibleConstraintsError(BiasedSelectError, ValueError):
    """No size-n selection satisfies the lower bounds."""


class UnsupportedGroupCountError(BiasedSelectError, ValueError):
    """Exact non-intersectional routines only handle p <= 3."""


class EnumerationTooLargeError(BiasedSelectError, ValueError):
    """Brute-force enumeration would exceed the subset guard."""


class AssumptionViolation(BiasedSelectError, ValueError):
    """Density bounds cannot hold (unbounded support or zero density)."""


class ZeroUtilityError(BiasedSelectError, ZeroDivisionError):
    """The optimal selection has zero latent utility."""
