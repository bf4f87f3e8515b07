"""Exception hierarchy shared across the package."""


class BellHVError(Exception):
    """Base class for all package errors."""


class DomainError(BellHVError, ValueError):
    """A hidden-variable point lies outside its model's space."""


class DegenerateDistributionError(BellHVError, ArithmeticError):
    """A weighted density has zero total mass at the requested settings."""


class NotApplicableError(BellHVError, TypeError):
    """An operation was requested for a model family it does not apply to."""


class ConfigError(BellHVError, ValueError):
    """A run configuration could not be parsed or validated.

    ``where`` is a field path (``density.weights[2]``) or a ``line:col``
    location in the source file.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
