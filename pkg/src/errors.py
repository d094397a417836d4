"""
Exception hierarchy for CloneMix.
Structural problems raise; zero-probability MCMC states never do.
"""
from typing import Optional


class CloneMixError(Exception):
    """Base class for every error raised by the package."""


class StructuralError(CloneMixError, ValueError):
    """Shapes disagree, counts are invalid, or an input is empty."""


class DegenerateStateError(CloneMixError):
    """Some sample copy number M_st is not positive where p_st is needed."""


class SamplerInternalError(CloneMixError, RuntimeError):
    """A full conditional has no candidate with positive probability."""


class CountsParseError(StructuralError):
    """
    A read-count file could not be parsed or validated.
    Row and column are 1-based data coordinates (header and id column excluded).
    """

    def __init__(self, message: str, path: str = "", row: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"locus row {row}")
        if column is not None:
            where.append(f"sample column {column}")
        location = f" at {', '.join(where)}" if where else ""
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}{location}")


class EmptyInputError(CountsParseError):
    pass


class HeaderMismatchError(CountsParseError):
    pass
