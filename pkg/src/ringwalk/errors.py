"""Exception types raised by the ringwalk package."""


class ParameterError(ValueError):
    """An input violates a documented bound (node count, range, rate...)."""


class CapacityError(MemoryError):
    """A dense operator would exceed the configured size guard."""


class UnsupportedCaseError(ValueError):
    """The requested closed form does not cover this parameter regime."""


class IntegrationError(RuntimeError):
    """The adaptive integrator could not meet its tolerance.

    ``t`` is the time at which the step size underflowed.
    """

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t!r})")
        self.t = t


class InfiniteBoundError(ParameterError):
    """A mixing-time bound diverges (no dephasing)."""
