"""
Exception hierarchy for fracspde.

Every failure the library raises on purpose derives from FracSpdeError so
callers (and the CLI) can separate modelling errors from programming errors.
"""

from typing import Optional


class FracSpdeError(Exception):
    """Base class for all fracspde errors."""


class ConfigurationError(FracSpdeError, ValueError):
    """A parameter lies outside its documented domain."""


class DiagonalSingularityError(FracSpdeError):
    """A covariance density was evaluated on the diagonal s = t."""


class DomainError(FracSpdeError, ValueError):
    """An argument lies outside the domain of a mathematical function."""


class NumericalPSDError(FracSpdeError):
    """A Gram matrix could not be factorized even after jitter."""


class UnsupportedError(FracSpdeError):
    """The requested variant exists in principle but is not supported."""


class ResolutionError(FracSpdeError):
    """A discretization is too coarse for the requested computation."""


class GridMismatchError(FracSpdeError):
    """Breakpoints or grids do not line up."""


class NotInHError(FracSpdeError):
    """An integrand does not have a finite |H| norm."""


class StatisticsError(FracSpdeError):
    """A Monte-Carlo statistic is undefined or has too few samples."""


class StateError(FracSpdeError):
    """A network state violates the trace constraint u(0) = u_d(1) = d."""


class ContractError(FracSpdeError):
    """A user-supplied callable violates its declared contract."""


class PreconditionError(FracSpdeError):
    """A documented precondition of an estimator is not met."""


class DivergenceError(FracSpdeError):
    """A time stepper exceeded the blow-up threshold."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step
