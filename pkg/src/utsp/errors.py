"""Exception types shared across the package."""


class UtspError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(UtspError, ValueError):
    """A parameter is outside its allowed range or violates a constraint."""


class BudgetError(UtspError, RuntimeError):
    """An enumeration or search exceeded its configured budget."""


class SnapError(UtspError, ValueError):
    """A point does not coincide with a grid cell center."""


class DuplicatePointError(UtspError, ValueError):
    """Two input points snap to the same grid cell."""


class OrderFileError(UtspError, ValueError):
    """An order file is malformed; carries the first offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SizeError(UtspError, ValueError):
    """Input is too large for an exact computation."""


class WitnessError(UtspError, ValueError):
    """A supplied witness (tour, chain, walk outcome) fails validation."""


class ResolutionError(UtspError, RuntimeError):
    """The grid is too coarse for the requested construction."""


class ConstructionError(UtspError, RuntimeError):
    """An internally produced certificate failed its own invariant check."""


class CoverageError(UtspError, RuntimeError):
    """A requested scale contains a square without a certified backtrack."""
