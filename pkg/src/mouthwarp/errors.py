"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input violates a documented shape, dtype or range contract."""


class ConventionError(InvalidInputError):
    """Landmark data does not follow the expected index convention."""


class DegenerateGeometryError(InvalidInputError):
    """Point configuration is collinear, coincident or otherwise degenerate."""


class SingularSystemError(DegenerateGeometryError):
    """The interpolation linear system has no unique solution."""


class InsufficientDataError(InvalidInputError):
    """Not enough frames/entries to perform the requested operation."""


class EmptyBankError(InvalidInputError):
    """Retrieval was attempted against an empty texture bank."""


class DegenerateMaskError(InvalidInputError):
    """Mask polygon has zero area or rasterizes to a single value."""


class UndefinedMetricError(InvalidInputError):
    """Metric is undefined for the given inputs (e.g. two all-zero curves)."""


class NumericalFailureError(RuntimeError):
    """A numeric routine produced non-finite values."""
