"""Exception types shared across the package."""


class StabilizeError(Exception):
    """Base class for all package errors."""


class GeometryError(StabilizeError):
    """Input geometry is inconsistent (broken symmetry, bad sample set)."""


class HypothesisError(StabilizeError):
    """A lemma hypothesis fails for the supplied data."""


class DegenerateInputError(StabilizeError):
    """Input is degenerate for the requested operation."""


class NotUnimodularError(StabilizeError):
    """The pair has a common zero (or measured delta is zero)."""


class SignConditionError(StabilizeError):
    """The single-sign condition on the imaginary axis is violated."""


class ConstructionError(StabilizeError):
    """A geometric construction step failed (e.g. slit disjointness)."""


class GridError(StabilizeError):
    """The computational grid is too small for the requested operation."""


class InterpolationError(StabilizeError):
    """Bounded analytic interpolation failed or is ill-conditioned."""


class ConsistencyError(StabilizeError):
    """An internal cross-check between two computations disagreed."""


class ConfigError(StabilizeError):
    """Configuration text is malformed or out of range."""
