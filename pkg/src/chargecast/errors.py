"""Exception hierarchy for chargecast."""


class ChargecastError(Exception):
    """Base class for all errors raised by chargecast."""

    exit_code = 1


class ConfigurationError(ChargecastError, ValueError):
    """Invalid parameters, shapes or stage usage."""


class DomainError(ChargecastError, ValueError):
    """An argument lies outside the domain of an operation."""


class ArtifactError(ChargecastError):
    """A model artifact is missing, corrupt or of an unsupported version."""


class DataError(ChargecastError):
    """Input records or series are malformed or misaligned."""

    exit_code = 2


class NumericError(ChargecastError):
    """A numeric quantity became non-finite."""

    exit_code = 3


class TrainingError(NumericError):
    """Training diverged."""

    def __init__(
        self,
        message: str,
        *,
        stage: str | None = None,
        epoch: int | None = None,
        parameter: str | None = None,
    ) -> None:
        super().__init__(message)
        self.stage = stage
        self.epoch = epoch
        self.parameter = parameter


class SamplingError(NumericError):
    """The reverse process produced a non-finite state."""

    def __init__(self, message: str, *, step: int) -> None:
        super().__init__(message)
        self.step = step


class ModelError(NumericError):
    """The noise predictor produced a non-finite output."""
