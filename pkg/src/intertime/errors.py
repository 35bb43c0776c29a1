"""Exception hierarchy."""


class IntertimeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IntertimeError, ValueError):
    """Input violates a documented contract (bad row, bad parameter, ...)."""


class StructuralError(IntertimeError):
    """The chain lacks a structural property the operation needs (irreducibility, tree shape)."""


class UnsupportedOperationError(IntertimeError):
    """Operation is undefined for this kind of chain, e.g. a spectrum of a non-reversible chain."""


class DivergenceError(IntertimeError):
    """An iterative search exceeded its step cap."""


class BudgetError(IntertimeError):
    """Instance too large for an exact/brute-force routine."""
