"""Exception types shared across spiderlab."""


class SpiderlabError(Exception):
    """Base class for spiderlab errors."""


class DomainError(SpiderlabError, ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class RegimeMismatch(SpiderlabError, ValueError):
    """An operation was invoked for a penalty regime it does not cover."""


class QuadratureFailure(SpiderlabError, RuntimeError):
    """Adaptive quadrature could not reach its error target."""


class ConfigError(SpiderlabError, ValueError):
    """Invalid simulation or experiment configuration."""


class OutOfRange(SpiderlabError, ValueError):
    """A query time lies beyond the horizon of a simulated path."""


class EmptySample(SpiderlabError, ValueError):
    """A statistical test received an empty sample."""


class NonFiniteSample(SpiderlabError, RuntimeError):
    """A Monte Carlo functional produced a non-finite value.

    Carries the index of the offending trajectory.
    """

    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite functional value {value!r} at trajectory {index}")
        self.index = index
        self.value = value


class HorizonTooShort(SpiderlabError, RuntimeError):
    """A splice time was not reached before the simulation horizon."""


class HeavyTailWarning(UserWarning):
    """Penalization weights are too heavy-tailed for a reliable MC verdict."""
