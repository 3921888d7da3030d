"""Exception types raised across the package."""


class PredevalError(Exception):
    """Base class for all package errors."""


class ParseError(PredevalError, ValueError):
    """Malformed expression text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DuplicateAtomError(PredevalError, ValueError):
    def __init__(self, atom_text: str):
        super().__init__(f"duplicate predicate atom: {atom_text}")
        self.atom_text = atom_text


class NormalizationError(PredevalError, ValueError):
    pass


class MissingSelectivityError(PredevalError, ValueError):
    pass


class PlanningError(PredevalError, RuntimeError):
    """Inconsistent planner state (e.g. a missing or doubly written cache entry)."""


class DataError(PredevalError, ValueError):
    """Bad input data: ragged CSV, empty file, column/type mismatch."""


class OracleLimitError(PredevalError, ValueError):
    """Brute-force search requested beyond its size guard."""
