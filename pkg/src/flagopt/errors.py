"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """An iterative estimator ran out of iterations; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DivergenceError(RuntimeError):
    """A solver produced a nonfinite objective value; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ReferenceQualityError(RuntimeError):
    """A benchmarked iterate beat the reference optimum by more than the floor tolerance."""
