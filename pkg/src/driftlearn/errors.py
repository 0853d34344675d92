"""Exception types shared across the package."""


class DriftlearnError(Exception):
    """Base class for all package errors."""


class ShapeError(DriftlearnError):
    """Array or layer dimensions do not line up."""


class ArgumentError(DriftlearnError):
    """A call violated a precondition (empty batch, bad value, ...)."""


class DivergenceError(DriftlearnError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class IncompatibleSnapshotError(DriftlearnError):
    """Snapshot architecture does not match the model being restored."""


class FitError(DriftlearnError):
    """Scaler fitting failed (e.g. an all-missing column)."""


class ImputeError(DriftlearnError):
    """Missing-value filling is impossible for the given series."""


class OrderingError(DriftlearnError):
    """Timestamps are not monotonically non-decreasing."""


class MissingTargetError(DriftlearnError):
    """A predictor was asked to score a sample that carries no target."""


class StrategyError(DriftlearnError):
    """A continual-learning strategy cannot run with the data it was given."""


class ValidationError(DriftlearnError):
    """A request or hyperparameter edit violated an invariant."""


class ConflictError(DriftlearnError):
    """The operation clashes with existing state (duplicate id, decided update)."""


class NotFoundError(DriftlearnError):
    """Referenced update id or version does not exist."""


class ScenarioError(DriftlearnError):
    """A scenario script is malformed or fails during replay."""

    def __init__(self, message: str, event_index: int | None = None):
        self.event_index = event_index
        super().__init__(message)


class SchemaError(DriftlearnError):
    """A CSV file does not match its declared schema."""


class RowError(DriftlearnError):
    """A CSV row could not be parsed."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ExportError(DriftlearnError):
    """A run directory is incomplete and cannot be archived."""

    def __init__(self, message: str, missing: list[str] | None = None):
        self.missing = missing or []
        super().__init__(message)


class InternalError(DriftlearnError):
    """An invariant the code itself maintains was broken."""
