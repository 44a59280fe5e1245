"""Exception types shared across the package."""


class MlpaError(Exception):
    """Base class for all package-specific errors."""


class WidthError(MlpaError):
    """Bit-vector widths do not match the operation's requirements."""


class RoundError(MlpaError):
    """Round index outside the cipher's valid range."""


class ModelError(MlpaError):
    """Leakage model cannot be evaluated (e.g. HD with no reference state)."""


class MaskError(MlpaError):
    """Unsupported Hamming-weight mask."""


class ParseError(MlpaError):
    """Malformed relation line or CSV row."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class BudgetError(MlpaError):
    """Requested exhaustive computation exceeds the safety budget."""


class DataError(MlpaError):
    """Campaign empty or otherwise unusable for the requested statistic."""


class DegenerateModelError(MlpaError):
    """Model predictions carry no variance."""


class SupportError(MlpaError):
    """Approximations do not share a consistent key support."""


class ShapeError(MlpaError):
    """Array length is not a power of two."""


class FormatError(MlpaError):
    """Trace file is corrupt or not in the expected format."""


class ConfigError(MlpaError):
    """Experiment configuration is invalid; message names the field."""


class TableError(MlpaError):
    """Embedded cipher table failed its checksum self-test."""
