class LaprmtError(Exception):
    """Base class for library errors."""


class NonConvergence(LaprmtError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InvalidPoint(LaprmtError, ValueError):
    pass


class TrivialNotFound(LaprmtError):
    pass


class RankOneViolation(LaprmtError):
    pass


class TooLarge(LaprmtError, ValueError):
    pass


class ConfigError(LaprmtError):
    """Aggregated configuration violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))
