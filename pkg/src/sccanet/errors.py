"""Exception types shared across the package.

All exceptions raised on bad user input derive from :class:`ValidationError`
so the CLI can map them to a single exit code; runtime failures inside a
pipeline stage derive from :class:`StageError`.
"""

from __future__ import annotations


class SccaNetError(Exception):
    """Base class for all package errors."""


class ValidationError(SccaNetError):
    """Invalid input data, parameters, or configuration."""


class DatasetFormatError(ValidationError):
    """Malformed dataset file. Carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateGeneIdError(ValidationError):
    """A gene identifier appears more than once in a header."""


class MissingValueError(DatasetFormatError):
    """A required cell is empty or absent."""


class DimensionMismatchError(ValidationError):
    """Array shapes are inconsistent with each other or with metadata."""


class EmptyResultError(ValidationError):
    """An operation produced an empty result where genes were required."""


class DegenerateInputError(ValidationError):
    """Input is constant or otherwise carries no usable variation."""


class NotPositiveDefiniteError(ValidationError):
    """A matrix required to be positive definite is numerically singular."""


class CutNotFoundError(SccaNetError):
    """No dendrogram cut satisfies the requested small-cluster rule."""


class ConfigError(ValidationError):
    """Pipeline configuration file is invalid."""


class StageError(SccaNetError):
    """A pipeline stage failed after validation passed."""
