"""Exception types shared across the package."""


class InputError(ValueError):
    """Caller passed arguments that violate a documented precondition."""


class DataError(ValueError):
    """Input data are structurally valid but unusable (e.g. empty after filtering)."""


class SolverError(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the last residual in ``residual`` when available.
    """

    def __init__(self, message, residual=None, iteration=None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration
