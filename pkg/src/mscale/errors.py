"""Shared exception types."""


class NumericError(RuntimeError):
    """Raised when a computation produces non-finite values or fails to converge."""
