"""Exception hierarchy shared by all modules."""


class AsymfairError(Exception):
    """Base class for errors raised by this package."""


class DomainError(AsymfairError, ValueError):
    """An argument lies outside the domain of an operation."""


class QuadratureError(AsymfairError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance within budget."""


class DegenerateError(AsymfairError, ValueError):
    """A conditioning event has (numerically) zero probability, or similar."""


class SolverError(AsymfairError):
    """Base class for multiplier-solver failures."""


class NonTerminationError(SolverError):
    """The equalizing loop exceeded its iteration cap.

    Usually means the density bound ``q`` passed to the solver is invalid
    for the profile, or the probability oracle is inconsistent.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class GridSearchError(SolverError):
    """Grid search was refused (too many agents) or found no panchromatic cell."""


class ConvergenceError(AsymfairError, ArithmeticError):
    """An iterative optimizer ran out of iterations."""


class SizeGuardError(AsymfairError, ValueError):
    """An exhaustive routine was called on an instance that is too large."""
