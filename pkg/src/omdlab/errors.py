class OmdLabError(Exception):
    """Base class for all errors raised by omdlab."""

    exit_code = 1


class InputError(OmdLabError, ValueError):
    """Malformed or inconsistent arguments (dimension mismatch, infeasible point)."""


class DomainError(InputError):
    """A point lies outside the domain of a regularizer or cost."""


class NumericalError(OmdLabError, ArithmeticError):
    """Ill-conditioned linear algebra (e.g. a near-singular information matrix)."""


class CertificationError(OmdLabError):
    exit_code = 2

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class SolverError(OmdLabError):
    exit_code = 3

    def __init__(self, message, round_index=None, diagnostics=None):
        if round_index is not None:
            message = f"round {round_index}: {message}"
        super().__init__(message)
        self.round_index = round_index
        self.diagnostics = diagnostics or {}


class ConfigError(OmdLabError):
    exit_code = 5


class ConvergenceWarning(UserWarning):
    pass
