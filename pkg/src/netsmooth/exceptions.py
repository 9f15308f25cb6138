"""Exception hierarchy shared across the package."""


class NetsmoothError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(NetsmoothError, ValueError):
    """An input violates a documented value constraint."""


class DimensionError(NetsmoothError, ValueError):
    """Arrays have incompatible or unsupported shapes."""


class RankError(NetsmoothError, ValueError):
    """A matrix is numerically rank deficient where full rank is required.

    Carries the detected numerical rank in ``detected_rank``.
    """

    def __init__(self, message: str, detected_rank: int):
        super().__init__(f"{message} (detected numerical rank {detected_rank})")
        self.detected_rank = detected_rank


class NumericalError(NetsmoothError, RuntimeError):
    """An iterative solver failed to converge or a solve broke down."""

    def __init__(self, message: str, iterations: int | None = None):
        if iterations is not None:
            message = f"{message} (after {iterations} iterations)"
        super().__init__(message)
        self.iterations = iterations


class IdentificationError(NetsmoothError, ValueError):
    """The instrument set is too collinear to identify the model."""


class DegenerateDesignError(NetsmoothError, RuntimeError):
    """The projected design matrix is numerically singular.

    Carries the offending condition number in ``condition_number``.
    """

    def __init__(self, message: str, condition_number: float | None = None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class ConfigError(NetsmoothError, ValueError):
    """An experiment configuration is malformed or self-contradictory."""
