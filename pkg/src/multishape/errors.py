"""Exception hierarchy.

Every error raised by the library derives from :class:`ShapeError`; the CLI
maps the two families below onto its exit codes (data errors -> 2,
numerical failures -> 3).
"""


class ShapeError(Exception):
    """Base class for all library errors."""


class DataError(ShapeError, ValueError):
    """Input data is malformed, inconsistent or degenerate."""


class DomainError(DataError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(DataError):
    pass


class FitError(DataError):
    """Least-squares smoothing failed (rank-deficient design)."""


class NumericalError(ShapeError, ArithmeticError):
    """A numerical procedure could not produce a usable result."""


class AntipodalError(NumericalError):
    """Logarithm map requested at (or too near) the antipode of the base point."""
