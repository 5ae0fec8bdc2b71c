"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AqssError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(AqssError):
    """Malformed access-structure input.

    Carries a 1-based (line, column) position when the input was the
    line-oriented text format; both are None for JSON inputs.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class OverlapViolationError(AqssError):
    """Two authorized sets are disjoint where pairwise overlap is required."""


class UnsupportedStructureError(AqssError):
    """The structure falls outside what this implementation can build."""


class DegenerateRestrictionError(AqssError):
    """Removing a player left an empty authorized set."""


class CapExceededError(AqssError):
    """A combinatorial size cap (players or graph vertices) was exceeded."""


class ResourceCapError(AqssError):
    """The simulation would exceed the configured amplitude cap."""


class InsufficientSharesError(AqssError):
    """Reconstruction failed: a needed node cannot gather enough shares."""

    def __init__(self, node_path: str, have: int, need: int):
        self.node_path = node_path
        self.have = have
        self.need = need
        super().__init__(f"cannot decode node {node_path}: {have} of {need} required shares available")
