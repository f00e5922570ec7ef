"""Exception and warning types shared across the package."""


class NoiseTomoError(Exception):
    """Base class for all package errors."""

    category = "error"


class DomainError(NoiseTomoError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = "config"


class ConfigError(NoiseTomoError, ValueError):
    category = "config"


class DataError(NoiseTomoError, ValueError):
    """Measurement data is malformed or inconsistent with the model."""

    category = "data"


class CalibrationError(DataError):
    def __init__(self, message, setting_id=None):
        if setting_id is not None:
            message = f"setting {setting_id}: {message}"
        super().__init__(message)
        self.setting_id = setting_id


class SolverError(NoiseTomoError, RuntimeError):
    category = "solver"

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConsistencyError(NoiseTomoError, RuntimeError):
    """An internal invariant was violated (probabilities out of range, ...)."""

    category = "consistency"


class TruncationWarning(UserWarning):
    pass


class CalibrationWarning(UserWarning):
    pass


class UnderdeterminedWarning(UserWarning):
    pass
