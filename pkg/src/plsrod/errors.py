"""Exception types raised by the solvers."""


class PlsRodError(Exception):
    """Base class; ``details`` carries machine-readable diagnostics."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class DomainError(PlsRodError, ValueError):
    pass


class SingularConfigurationError(PlsRodError):
    pass


class ConvergenceError(PlsRodError):
    pass


class SingularMatrixError(PlsRodError):
    pass


class DifferentialAlgebraicError(PlsRodError):
    pass
