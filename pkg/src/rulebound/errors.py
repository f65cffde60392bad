"""Shared exception types."""

from __future__ import annotations


class RuleboundError(Exception):
    """Base class for all package errors."""


class ParseError(RuleboundError):
    """A file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VocabularyError(RuleboundError):
    """A label is missing from the vocabulary in use."""


class TrainingDiverged(RuleboundError):
    """Training produced a non-finite loss; carries diagnostics in the message."""
