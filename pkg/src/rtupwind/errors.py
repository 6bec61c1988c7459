"""Exception types shared across the solver."""


class ConfigError(ValueError):
    """A grid, medium, kernel, or run configuration is invalid.

    The message names the offending field or file.
    """


class StabilityError(RuntimeError):
    """A run was refused because a stability precondition failed.

    Carries the full report so callers can surface margins.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericsError(ArithmeticError):
    """A non-finite value appeared mid-run."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
