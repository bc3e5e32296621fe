"""Exception hierarchy shared by the library and the command-line tool."""


class SatAbsError(Exception):
    """Base class for all package errors."""


class DomainError(SatAbsError, ValueError):
    """An argument lies outside the domain of a function."""


class ValidationError(SatAbsError, ValueError):
    """Inconsistent or malformed input data (shapes, configs, files)."""


class ConvergenceError(SatAbsError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    Attributes
    ----------
    residual : float
        Last residual reached before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
