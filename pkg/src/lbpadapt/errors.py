"""Exception types shared across the package."""


class LbpError(Exception):
    """Base class for all package errors."""


class ExpressionError(LbpError):
    """Syntax or semantic error in a rate expression.

    Carries the 0-based column ``pos`` of the offending token within the
    expression text (None when no position applies).
    """

    def __init__(self, message, pos=None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at column {pos})"
        super().__init__(message)


class ConfigError(LbpError):
    """Malformed model configuration text."""


class ModelError(LbpError):
    """Model evaluation violated a contract (non-finite rate, c below c_min, ...)."""


class SolverError(LbpError):
    """A numerical solve failed to meet its tolerance or exceeded a cap."""


class TableRangeError(LbpError):
    """Requested theta lies outside the range of an interpolation table."""
