"""
Error hierarchy shared by the numerical services and the command layer.

Each error carries the process exit code the command line maps it to:
2 for bad input, 1 for a domain failure on valid input.
"""

from typing import Optional


class IqopError(Exception):
    """Base class for every diagnosed toolkit failure."""

    exit_code: int = 1
    kind: str = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def diagnostic(self) -> str:
        return f"{self.kind}: {self.message}"


class InvalidArgumentError(IqopError, ValueError):
    exit_code = 2
    kind = "invalid-argument"


class ParseError(IqopError):
    """Malformed input file; ``line`` is 1-based when known."""

    exit_code = 2
    kind = "parse-error"

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class RecordValidationError(IqopError):
    """One or more data rows violate a record-level invariant."""

    exit_code = 2
    kind = "validation-error"

    def __init__(self, message: str, rows: list[int]):
        self.rows = rows
        super().__init__(f"{message} (rows {', '.join(str(r) for r in rows)})")


class DegenerateInputError(IqopError):
    kind = "degenerate-input"


class InsufficientDataError(IqopError):
    kind = "insufficient-data"


class FitFailureError(IqopError):
    kind = "fit-failure"


class InfeasibleDesignError(IqopError):
    kind = "infeasible-design"


class ConsistencyError(IqopError):
    """Two derivations of the same quantity disagree beyond tolerance."""

    kind = "consistency-error"
