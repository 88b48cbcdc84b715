"""Semantic exception hierarchy.

The CLI maps these onto exit codes: validation problems (DomainError,
FormatError, InsufficientDataError) exit 2, NumericalError exits 3.
"""


class DurcastError(Exception):
    """Base class for all package errors."""


class DomainError(DurcastError, ValueError):
    """An argument violates a documented precondition or invariant."""


class FormatError(DurcastError, ValueError):
    """A file or record does not match the expected format."""


class InsufficientDataError(DomainError):
    """Not enough observations to perform the requested operation."""


class NumericalError(DurcastError, RuntimeError):
    """An iterative routine failed to reach its accuracy target."""
