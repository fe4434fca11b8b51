"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid operator, tableau or experiment configuration."""


class UsageError(ValueError):
    """Arguments of incompatible shape or kind."""


class ParameterError(ValueError):
    """Physical parameter outside the admissible range."""


class SingularOperatorError(ArithmeticError):
    """A linear operator has a vanishing symbol or pivot."""

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class SolverError(RuntimeError):
    """A stage or elliptic solve failed."""


class IterationError(RuntimeError):
    """A fixed-point iteration did not converge."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DivergenceError(RuntimeError):
    """An iteration or time integration left the healthy regime."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SingularityError(ArithmeticError):
    """A traveling-wave ODE denominator vanished."""
