"""Exception types shared across the solver."""


class NovaError(Exception):
    """Base class for all solver errors."""


class InputError(NovaError):
    """Malformed caller input: wrong dimension, infeasible start point, ..."""


class ParameterError(NovaError):
    """A numeric parameter is outside its admissible range."""


class ConfigurationError(NovaError):
    """Inconsistent or unsupported configuration."""


class ConvergenceError(NovaError):
    """An iterative solve hit its iteration cap before reaching tolerance.

    The best iterate found so far is attached as ``best`` so callers can
    inspect partial progress.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InfeasibilityError(NovaError):
    """A subproblem looks infeasible (multiplier divergence or an empty block)."""
