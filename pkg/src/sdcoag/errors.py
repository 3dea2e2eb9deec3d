"""Exception hierarchy shared across the package."""


class SDError(Exception):
    """Base class for every error raised by sdcoag."""


class RangeError(SDError, IndexError):
    """A size index or truncation parameter lies outside its valid range."""


class ValidationError(SDError, ValueError):
    """Input data (state, kernel parameters, perturbation) is invalid."""


class UnsupportedKernelError(SDError, TypeError):
    """The requested operation needs a separable kernel."""


class ConfigError(SDError, ValueError):
    """A run or verification config failed to parse or validate."""


class IntegrationError(SDError, RuntimeError):
    """The time integrator could not reach the requested horizon."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class HorizonError(IntegrationError):
    """``max_steps`` was exhausted before ``t_end``."""


class StiffnessError(IntegrationError):
    """The step size underflowed; the problem is too stiff for an explicit pair."""
