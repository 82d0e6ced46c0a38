"""Exception hierarchy shared by all modules."""


class WidedegError(Exception):
    """Base class for library errors."""


class InvalidInputError(WidedegError, ValueError):
    """An argument is malformed, non-finite or out of range."""


class DomainError(InvalidInputError):
    """A quantity is undefined at the supplied point (e.g. a Jacobian at 0)."""


class DegeneratePointError(DomainError):
    """The point lies in the degeneracy ball ``|xi| <= 1``."""


class PreconditionError(InvalidInputError):
    """A documented precondition of an operation does not hold."""


class ConfigError(InvalidInputError):
    """A configuration file is malformed or carries unknown keys."""


class NumericalFailureError(WidedegError, ArithmeticError):
    """A NaN or overflow appeared during an iteration."""


class PartialResultError(WidedegError):
    """An iteration budget ran out; ``result`` holds the best iterate."""

    def __init__(self, message, result=None, report=None):
        super().__init__(message)
        self.result = result
        self.report = report


class DivergenceError(WidedegError):
    """An outer fixed-point iteration failed to contract within budget."""

    def __init__(self, message, trace=None, result=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.result = result
