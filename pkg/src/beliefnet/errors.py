"""Exception hierarchy shared across the package.

CLI exit codes map onto these: configuration/IO problems (SchemaError,
ParseError, ConflictError) exit 2, analysis problems exit 1.
"""


class BeliefNetError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(BeliefNetError):
    """Bad schema or run configuration."""


class ParseError(BeliefNetError):
    """Malformed input row; message carries the row index."""


class ConflictError(BeliefNetError):
    """Duplicate (person, time, variable) key in the input."""


class DomainError(BeliefNetError):
    """A value is outside its declared domain; message names the cell."""


class DimensionError(BeliefNetError):
    """Degenerate shape (too few persons, time points, or observations)."""


class ModelDomainError(BeliefNetError):
    """Parameter values outside the model's domain, e.g. singular (I - omega)."""


class FitError(BeliefNetError):
    """Optimizer failed to converge; carries the log-likelihood trace."""

    def __init__(self, message, ll_trace=None):
        super().__init__(message)
        self.ll_trace = list(ll_trace) if ll_trace is not None else []


class AggregationError(BeliefNetError):
    """An aggregate step had too few valid inputs (meta-analysis, model sweep)."""
