"""Exception types shared across the package."""

from __future__ import annotations


class ConvosimError(Exception):
    """Base class for all package errors."""


class ValidationError(ConvosimError, ValueError):
    """Input parsed fine but violates a contract (scale, uniqueness, ...)."""


class ParseError(ConvosimError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class PoolExhausted(ConvosimError):
    """The recommender has no eligible item left to show."""
