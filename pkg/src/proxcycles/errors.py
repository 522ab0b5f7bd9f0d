"""Exception hierarchy shared by all modules."""


class ProxCycleError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ProxCycleError, ValueError):
    pass


class InvalidRootError(ProxCycleError, ValueError):
    """The operator does not satisfy R^m = Id within tolerance."""


class UnsupportedError(ProxCycleError):
    """The operation needs an isometric root but got a non-isometric one."""


class DomainError(ProxCycleError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class PreconditionError(ProxCycleError, ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InconclusiveError(ProxCycleError):
    """Random sampling could not produce a usable sample."""


class NumericError(ProxCycleError, ArithmeticError):
    """An iterative numerical routine failed.

    ``trace`` holds whatever diagnostic history the routine collected
    (a list of tuples or a :class:`~proxcycles.solvers.SolveTrace`).
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DivergenceError(NumericError):
    """Iterates became non-finite or exceeded the divergence bound."""

    def __init__(self, message, trace=None, last=None):
        super().__init__(message, trace)
        self.last = last


class PhantomProxError(NumericError):
    """The inner solver behind the phantom proximal map did not converge."""
