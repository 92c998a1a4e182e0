"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an input violates an operation's preconditions."""


class NumericalError(RuntimeError):
    """A solver failed to converge or broke down.

    ``report`` carries whatever diagnostic object the failing routine had
    (a ``SolveReport``, a Newton residual trace, ...). ``t`` is the
    simulation time at which the failure happened, when known.
    """

    def __init__(self, message, report=None, t=None):
        super().__init__(message)
        self.report = report
        self.t = t


class ReduceTimestepError(NumericalError):
    """The implicit reaction diagonal lost positivity; use a smaller tau."""


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
