"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class ConditioningError(ArithmeticError):
    """A least-squares design is numerically rank deficient.

    Attributes
    ----------
    condition : float
        Column-scaled condition estimate of the design (``inf`` when the
        system is underdetermined).
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class EmptyBandError(ValueError):
    """A band-limited pilot has no energy in the band it must occupy."""


class DegenerateError(ArithmeticError):
    """A ratio or projection has a zero denominator."""


class StepError(RuntimeError):
    """Failure inside one step of the identification pipeline."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
