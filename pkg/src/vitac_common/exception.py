"""
Centralised exception hierarchy and pretty-traceback helper.

Example
-------
    from vitac_common.exception import (
        error_message_detail, VitacError, NumericError
    )

    try:
        loss = step()
    except FloatingPointError as exc:
        log.error(error_message_detail(exc))
        raise NumericError("Loss diverged") from exc
"""
from __future__ import annotations

import sys

from vitac_common.logger import get_logger

log = get_logger(__name__)

def error_message_detail(exc: Exception) -> str:
    """Return `[file:line] ExceptionType: message` for the active traceback."""
    exc_type, _, exc_tb = sys.exc_info()
    if exc_tb is None or exc_type is None:
        return f"{type(exc).__name__}: {exc}"

    while exc_tb.tb_next:
        exc_tb = exc_tb.tb_next

    filename: str = exc_tb.tb_frame.f_code.co_filename
    lineno: int = exc_tb.tb_lineno
    return f"[{filename}:{lineno}] {exc_type.__name__}: {exc}"

class VitacError(Exception):
    """Base class for all custom errors in the vitac codebase."""


class ConfigError(VitacError):
    """Raised when a run configuration key or value is invalid."""


class ShapeError(VitacError, ValueError):
    """Raised when array dimensions do not agree."""


class NumericError(VitacError, ArithmeticError):
    """Raised when a loss, gradient or difference quotient is not finite."""


class DataValidationError(VitacError):
    """Raised when records, observations or groups break a dataset invariant."""


class IngestError(VitacError):
    """Raised when an image tree cannot be turned into a dataset."""


class ModelCompatibilityError(VitacError):
    """Raised when a checkpoint does not fit the dataset or architecture."""


class FileFormatError(VitacError):
    """Base class for malformed binary files (PNM, dataset, checkpoint)."""


class BadMagicError(FileFormatError):
    """Raised when a file does not start with the expected magic bytes."""


class VersionMismatchError(FileFormatError):
    """Raised when a file was written by an unsupported format version."""


class TruncatedFileError(FileFormatError):
    """Raised when a file ends before its declared payload."""


class UnsupportedFormatError(FileFormatError):
    """Raised when a header is well formed but describes something we cannot read."""


# Exported names
__all__ = [
    "VitacError",
    "ConfigError",
    "ShapeError",
    "NumericError",
    "DataValidationError",
    "IngestError",
    "ModelCompatibilityError",
    "FileFormatError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedFileError",
    "UnsupportedFormatError",
    "error_message_detail",
]
