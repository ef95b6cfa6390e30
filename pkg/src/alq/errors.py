"""Exception types shared across the package."""


class AlqError(Exception):
    """Base class for all package errors."""


class ValidationError(AlqError, ValueError):
    """Invalid parameters, inconsistent sizes, or exceeded enumeration caps."""


class ZeroMassError(AlqError):
    """A conditioning event has zero posterior mass."""


class UnreachableStateError(AlqError):
    """A revealed-label state cannot be produced by the optimal policy."""


class InvariantViolation(AlqError):
    """A mathematical invariant that must hold exactly was violated."""
