"""Exception taxonomy shared across the package.

Validation-type failures (bad configuration, malformed data, values outside
a mathematical domain) map to CLI exit code 2; numerical failures map to 3.
"""

from __future__ import annotations


class GaptrackError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(GaptrackError):
    """A model or run configuration violates a structural contract."""


class ValidationError(GaptrackError):
    """Input data failed a consistency check."""


class ParseError(ValidationError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class DomainError(GaptrackError):
    """A value lies outside the mathematical domain of an operation."""


class NumericalError(GaptrackError):
    """A computation produced non-finite results; carries the time index."""

    def __init__(self, message: str, time_index: int | None = None):
        self.time_index = time_index
        if time_index is not None:
            message = f"{message} (time index {time_index})"
        super().__init__(message)


class InitializationError(GaptrackError):
    """The sampler could not evaluate its starting point."""
