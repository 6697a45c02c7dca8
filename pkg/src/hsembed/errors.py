"""Exception taxonomy shared by all modules."""


class HsembedError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(HsembedError, ValueError):
    """An argument violates a documented constraint; the message names it."""


class UnsupportedDimensionError(ParameterError):
    """Horizontal dimension n < 2 is not supported (kernel degenerates)."""


class DomainError(HsembedError, ValueError):
    """A point or region lies outside the domain an operation requires."""


class ConfigurationRejectedError(HsembedError):
    """A requested computation fails its convergence or validity preconditions."""


class EvaluationError(HsembedError):
    """An integrand or function produced a non-finite value."""


class TaskError(HsembedError):
    """A CLI task cannot be executed with the given report or inputs."""
