"""Exception hierarchy shared by every module."""


class InterpFlowError(Exception):
    """Base class for all package errors."""


class DomainError(InterpFlowError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ParameterError(InterpFlowError, ValueError):
    """An invalid constructor or function parameter."""


class PreconditionError(InterpFlowError, ValueError):
    """A documented precondition (e.g. admissibility) does not hold."""


class ScheduleError(InterpFlowError, ValueError):
    """The interpolation coefficients are degenerate at the requested time."""


class TimeClampError(DomainError):
    """Requested time falls outside the clamped range of a quadrature backend."""


class UnsupportedCaseError(InterpFlowError, ValueError):
    """The closed form does not apply (e.g. non-commuting covariances)."""


class NumericError(InterpFlowError, ArithmeticError):
    """A numerical routine produced a non-finite or singular result."""


class SamplerError(InterpFlowError, RuntimeError):
    """Sampling failed, typically from a vanishing acceptance rate."""


class DivergenceError(NumericError):
    """An integrated trajectory became non-finite."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class SymmetryError(InterpFlowError, AssertionError):
    """A velocity Jacobian that must be symmetric is not."""


class ConfigError(InterpFlowError, ValueError):
    """An experiment configuration failed to parse or validate."""
