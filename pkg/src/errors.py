"""Exception hierarchy shared across the opfgap packages."""

from __future__ import annotations


class OpfGapError(Exception):
    """Base class for input and usage errors the CLI reports with exit code 3."""


class NetworkValidationError(OpfGapError):
    """A network record violates a structural or physical invariant."""


class CaseParseError(OpfGapError):
    """A case document could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ScenarioError(OpfGapError):
    """A scenario file or override is invalid."""


class ProblemStructureError(OpfGapError):
    """An NLP instance is structurally inconsistent (bounds, references)."""


class UndefinedGapError(OpfGapError):
    """The optimality gap is undefined for a nonpositive reference cost."""


class PlotError(OpfGapError):
    """A plot request selected no drawable data."""


class ResultsFormatError(OpfGapError):
    """A results CSV does not follow the fixed schema."""
