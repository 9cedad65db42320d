"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the supported domain."""


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


class DivergenceError(RuntimeError):
    """An iterative solve produced non-finite values."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"solver diverged at iteration {iteration}")


class CalibrationError(RuntimeError):
    """Threshold calibration failed over the whole search grid."""


class InfeasibleSystemError(RuntimeError):
    """An equality-constrained solve has no feasible point."""

    def __init__(self, violation: float, message: str | None = None):
        self.violation = violation
        super().__init__(
            message
            or f"no feasible point, least squares violation {violation:.3e}"
        )
