"""Exception hierarchy shared by every stage of the pipeline."""


class LvspillError(Exception):
    """Base class for all errors raised by :mod:`lvspill`."""


class SchemaError(LvspillError, ValueError):
    """Input file is missing a required column."""


class IntegrityError(LvspillError, ValueError):
    """Duplicate dates, name collisions and similar invariant violations."""


class EmptyInputError(LvspillError, ValueError):
    """No usable observations."""


class ColumnLookupError(LvspillError, KeyError):
    """A referenced column does not exist in the panel."""


class DomainError(LvspillError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ParameterError(LvspillError, ValueError):
    """An argument is outside its documented range."""


class DegeneracyError(LvspillError, ValueError):
    """Zero variance, constant columns or degenerate distributions."""


class CollinearityError(LvspillError, ValueError):
    """Regressor matrix is rank deficient."""


class SampleSizeError(LvspillError, ValueError):
    """Too few observations for the requested estimator."""


class ShapeError(LvspillError, ValueError):
    """Array dimensions do not match."""


class FactorizationError(LvspillError, ValueError):
    """Cholesky factorization failed even after ridge jitter."""


class ProtocolError(LvspillError, ValueError):
    """The leakage-safe evaluation protocol was violated."""


class LabelingError(LvspillError, ValueError):
    """Labels cannot be formed from the training distribution."""


class ConvergenceError(LvspillError, RuntimeError):
    """Optimizer did not converge; ``last_iterate`` carries its final point."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConfigError(LvspillError, ValueError):
    """Invalid or unknown configuration keys."""
