"""
Exception hierarchy shared by the library and the CLI
"""

from typing import Any, Dict, Optional


class GraphFKTError(Exception):
    """Base class for every error raised on purpose by graphfkt"""


class UsageError(GraphFKTError, ValueError):
    """Invalid parameters or command-line usage (CLI exit code 1)"""


class DataError(GraphFKTError, ValueError):
    """Malformed or inconsistent input data (CLI exit code 2)"""


class AtlasParseError(DataError):
    """A line of an atlas file could not be accepted"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatchError(DataError):
    """Matrix shapes do not agree"""


class SingleClassError(DataError):
    """An operation that needs both classes received only one"""


class NumericalError(DataError):
    """An eigensolver or residual check failed"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.details = details or {}
        if self.details:
            extra = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                              for k, v in self.details.items())
            message = f"{message} ({extra})"
        super().__init__(message)
