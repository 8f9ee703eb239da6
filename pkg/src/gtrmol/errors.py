"""Exception types raised by the parsers and graph operations."""

from __future__ import annotations


class GtrError(Exception):
    """Base class for every error raised by gtrmol."""


class GraphError(GtrError):
    """A graph failed validation where a valid graph was required."""


class ParseError(GtrError):
    """Base for positioned parse errors.

    ``position`` is a 0-based character offset for SMILES input and a 1-based
    line number for line-oriented formats (molfiles, CoT text, tables).
    """

    unit = "position"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at {self.unit} {position})")
        self.message = message
        self.position = position


class SmilesError(ParseError):
    unit = "offset"


class MolfileError(ParseError):
    unit = "line"


class CotError(ParseError):
    unit = "line"


class TableError(ParseError):
    unit = "line"


class ScoreInputError(GtrError):
    """Prediction or ground-truth input that cannot be scored (duplicate ids and the like)."""
