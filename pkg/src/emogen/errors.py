"""Exception hierarchy shared by the whole engine.

The CLI maps these onto fixed exit codes: UsageError -> 1, the data-side
errors (DataError, ParseError, DecodeError, LabelError) -> 2,
ArchiveError -> 3.
"""


class EmogenError(Exception):
    """Base class for all engine errors."""


class ShapeError(EmogenError):
    """Tensor shapes do not satisfy an operation's contract."""


class ConfigError(EmogenError):
    """Invalid model or training configuration."""


class DataError(EmogenError):
    """Dataset-level problem (empty dataset, unusable input)."""


class LabelError(EmogenError):
    """Class index outside the task's label range."""


class ParseError(EmogenError):
    """Row-level parse failure; carries the 1-based data row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DecodeError(EmogenError):
    """Malformed or truncated image payload."""


class ArchiveError(EmogenError):
    """Weight archive is corrupt or does not match the requested model."""


class UsageError(EmogenError):
    """Bad command-line flags or flag combinations."""
