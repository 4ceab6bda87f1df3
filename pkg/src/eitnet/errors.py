"""Exception hierarchy shared by all modules."""


class EITError(Exception):
    """Base class for all package errors."""


class DomainError(EITError, ValueError):
    """Input outside the domain of a function (e.g. r <= 0, sigma <= 0)."""


class ArgumentError(EITError, ValueError):
    """Invalid or infeasible argument combination."""


class StructuralError(EITError):
    """Singular or disconnected network structure."""


class InconsistentDataError(EITError):
    """Data that cannot come from a valid model (e.g. negative continued fraction coefficient)."""

    def __init__(self, message, index=None, layer=None):
        super().__init__(message)
        self.index = index
        self.layer = layer


class BreakdownError(EITError):
    """Loss of positivity in a three-term recursion."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IllConditionedError(EITError):
    """Linear system too ill-conditioned for the requested precision."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class AccuracyError(EITError):
    """Discretization could not reach the requested accuracy."""


class ConvergenceError(EITError):
    """Iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
