from __future__ import annotations

from typing import Optional


class NtlError(Exception):
    """Base class of every error raised by the detection pipeline."""


class DataFormatError(NtlError):
    """Exception raised when a consumption file or matrix is malformed.

    `row` and `column` locate the offending cell when it is known.
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        if row is not None or column is not None:
            message = f"{message} (row {row}, column {column})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(NtlError):
    """A configuration value is outside of its documented range."""


class InvalidInputError(NtlError, ValueError):
    """Arguments of an operation violate its preconditions.

    The reason is given as the exception message.
    """


class NoQueryWindow(NtlError):
    """No complete query window of at least three values borders the gap."""


class DivergenceError(NtlError):
    """Training produced a non-finite loss.

    `index` names the model that diverged (autoencoder number, or the GAN part).
    """

    def __init__(self, message: str, index: object = None):
        super().__init__(message if index is None else f"{message} [{index}]")
        self.index = index


class SchemaVersionError(NtlError):
    """A persisted document was written with another schema version."""


class StageError(NtlError):
    """A pipeline stage failed; `stage` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
