"""
Exception hierarchy for the ride-toolkit.

Every error raised on purpose by the toolkit derives from RideError so the CLI
can map it onto a data/model exit status.
"""

from typing import Optional


class RideError(Exception):
    """Base class for all toolkit errors."""


class DomainError(RideError, ValueError):
    """An operation was called outside of its documented preconditions."""


class ImageFormatError(DomainError):
    """
    A PGM or FGRD payload could not be decoded.

    Attributes:
        offset: Byte offset at which decoding failed
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ModelFormatError(DomainError):
    """A model container could not be decoded."""


class ConfigError(DomainError):
    """
    A configuration file entry was rejected.

    Attributes:
        line: 1-based line number of the offending entry, if known
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(RideError, ArithmeticError):
    """A numerical procedure hit a degenerate case (e.g. singular covariance)."""


class TrainingDivergedError(NumericError):
    """
    Training produced a non-finite loss.

    Attributes:
        epoch: Epoch index (0-based)
        batch: Batch index within the epoch (0-based)
        loss: The offending loss value
    """

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"Non-finite loss {loss} in epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
