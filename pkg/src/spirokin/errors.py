"""Exception types shared across the package."""


class SpirokinError(Exception):
    """Base class for all spirokin errors."""


class DomainError(SpirokinError, ValueError):
    """An input violates a documented precondition or invariant."""


class SolverError(SpirokinError, RuntimeError):
    """A numerical solve failed to converge or to bracket a root.

    Carries whatever diagnostic the solver had at the point of failure
    so callers can report it without re-running.
    """

    def __init__(self, message, *, bracket=None, residuals=None):
        super().__init__(message)
        self.bracket = bracket
        self.residuals = residuals
