"""
CUMI Toolkit — Error types
Every failure the toolkit raises on purpose derives from CumiError so the
CLI can map it onto an exit code.
"""

from typing import Optional


class CumiError(Exception):
    """Base class for toolkit errors."""


class ContractError(CumiError):
    """A documented precondition was violated by the caller."""


class DimensionError(CumiError):
    """Operand shapes do not fit together."""


class NumericError(CumiError):
    """Non-finite values, solver non-convergence or training divergence."""

    def __init__(self, message: str, epoch: Optional[int] = None, batch: Optional[int] = None):
        location = []
        if epoch is not None:
            location.append(f"epoch {epoch}")
        if batch is not None:
            location.append(f"batch {batch}")
        if location:
            message = f"{message} (at {', '.join(location)})"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


# ============================================================================
# DATA INGESTION
# ============================================================================

class DataError(CumiError):
    """Input file problem, located by file, row and column where known."""

    def __init__(self, message: str, path: Optional[str] = None,
                 row: Optional[int] = None, column: Optional[str] = None):
        parts = []
        if path is not None:
            parts.append(f"file={path}")
        if row is not None:
            parts.append(f"row={row}")
        if column is not None:
            parts.append(f"column={column}")
        if parts:
            message = f"{message} [{' '.join(parts)}]"
        super().__init__(message)
        self.path = path
        self.row = row
        self.column = column


class UnreadableFileError(DataError):
    pass


class RowCountMismatchError(DataError):
    pass


class DimMismatchError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class LabelRangeError(DataError):
    pass
