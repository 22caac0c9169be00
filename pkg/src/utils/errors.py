"""
🚨 Error types - every failure the pipeline can report, grouped by category.

The CLI turns the category of an error into its exit code, so library code
only has to raise the right class.
"""

from typing import Optional

from src.core.enums import ErrorCategory


class OescnError(Exception):
    """
    💥 Base class for all pipeline errors
    """
    category: ErrorCategory = ErrorCategory.CONFIG


class InvalidArgumentError(OescnError, ValueError):
    """Bad parameter value, inconsistent configuration or shape mismatch"""
    category = ErrorCategory.CONFIG


class InvalidDataError(OescnError, ValueError):
    """Input data violates its invariants (non-finite samples, bad labels)"""
    category = ErrorCategory.DATA


class NumericError(OescnError, ArithmeticError):
    """A non-finite value showed up where only finite values are allowed"""
    category = ErrorCategory.NUMERIC


class InvalidStateError(OescnError, RuntimeError):
    """An operation was called out of order (e.g. backward before forward)"""
    category = ErrorCategory.NUMERIC


class DatasetFormatError(InvalidDataError):
    """
    📦 A dataset container could not be parsed

    Args:
        message: What went wrong
        offset: Byte offset in the file where parsing failed
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        self.message = message
        self.offset = offset
        where = f" (at byte {offset})" if offset is not None else ""
        super().__init__(f"{message}{where}")

    def __reduce__(self):
        return (type(self), (self.message, self.offset))


class HeaderError(DatasetFormatError):
    """Bad magic, unsupported version or invalid header fields"""


class TruncationError(DatasetFormatError):
    """The payload ends before the header says it should"""


class LabelRangeError(DatasetFormatError):
    """A stored label is not in [0, n_classes)"""


class FoldError(OescnError):
    """
    🧩 Wraps an error raised while training or evaluating one fold

    The category of the wrapped error is kept so the exit code stays meaningful.
    """

    def __init__(self, fold_index: int, cause: Exception):
        self.fold_index = fold_index
        self.cause = cause
        self.category = getattr(cause, "category", ErrorCategory.NUMERIC)
        super().__init__(f"fold {fold_index}: {cause}")

    def __reduce__(self):
        return (FoldError, (self.fold_index, self.cause))
