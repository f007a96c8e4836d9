"""
Error types for the re-uploading classifier.

Every error raised by the library derives from ReuploadError and carries a
machine-readable kind, so the command line can report it as JSON.
"""

from typing import Dict, Optional


class ReuploadError(Exception):
    """Base error with a machine-readable kind and optional file path."""

    kind = "error"

    def __init__(self, message: str, path: Optional[str] = None, kind: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.path = str(path) if path is not None else None
        if kind is not None:
            self.kind = kind

    def to_dict(self) -> Dict:
        payload = {"error": self.kind, "message": self.message}
        if self.path is not None:
            payload["path"] = self.path
        return payload


class InvalidArgumentError(ReuploadError, ValueError):
    kind = "invalid-argument"


class UnsupportedError(ReuploadError, NotImplementedError):
    kind = "unsupported"


class ModelFormatError(ReuploadError, ValueError):
    """Model file could not be parsed, or was written by another format version."""

    kind = "parse-error"


class DatasetFormatError(ReuploadError, ValueError):
    kind = "parse-error"
