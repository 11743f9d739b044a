"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid configuration or mismatched dimensions."""


class DivergenceError(FloatingPointError):
    """Non-finite values appeared while integrating the flow."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at Euler step {step}")


class LambdaTooSmallError(ValueError):
    """The penalty weight does not dominate the sensitivity spectrum."""

    def __init__(self, lambda1, spectral_norm_sq):
        self.lambda1 = lambda1
        self.spectral_norm_sq = spectral_norm_sq
        super().__init__(
            f"lambda too small: lambda1={lambda1:.6g} <= ||L||^2={spectral_norm_sq:.6g}"
        )


class TrainingError(RuntimeError):
    """Training aborted; ``state`` holds the snapshot at the point of failure."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)
