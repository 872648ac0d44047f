"""Exception hierarchy shared across the package."""


class ObjectFdaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidObjectError(ObjectFdaError, ValueError):
    """An object violates an invariant of its space (asymmetry, non-monotone quantiles, ...)."""


class DimensionError(ObjectFdaError, ValueError):
    """Operands have incompatible dimensions."""


class GridError(ObjectFdaError, ValueError):
    """Time or probability grids are invalid or do not match."""


class DegenerateShapeError(ObjectFdaError, ValueError):
    """A landmark configuration has zero norm."""


class EmptyInputError(ObjectFdaError, ValueError):
    """An operation received an empty collection."""


class InsufficientSampleError(ObjectFdaError, ValueError):
    """An estimator needs more subjects than were provided."""


class ParameterError(ObjectFdaError, ValueError):
    """A tuning parameter is out of its admissible range."""


class ConfigError(ObjectFdaError, ValueError):
    """A generator configuration is inconsistent."""


class NumericalError(ObjectFdaError, ArithmeticError):
    """A numerical sanity check failed (e.g. an indefinite covariance surface)."""


class ConvergenceError(ObjectFdaError, ArithmeticError):
    """An iterative solver did not converge; carries the iteration count."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class ManifestError(ObjectFdaError, ValueError):
    """A sample manifest or artifact file failed to parse or validate."""
