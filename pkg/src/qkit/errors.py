"""Exception hierarchy shared across the toolkit."""


class QkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(QkitError):
    """A binary file does not conform to the QTNS/QTNQ container layout."""


class DataError(QkitError):
    """File payload or in-memory data violates a value constraint (NaN/Inf, domain)."""


class SolverError(QkitError):
    """Breakpoint search failed to converge or was configured inconsistently."""


class RecipeError(QkitError):
    """A quantization recipe field is out of its valid range."""
