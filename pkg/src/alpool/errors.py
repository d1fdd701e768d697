"""Error types shared across the package.

Every failure that crosses a module boundary carries a stable ``code``
string (e.g. ``BAD_MAGIC``, ``WRONG_PHASE``) so callers such as the HTTP
service can map it onto a wire format without parsing messages.
"""

from __future__ import annotations

from typing import Any


class AlError(Exception):
    """Base error with a stable machine-readable code."""

    def __init__(self, code: str, message: str, **detail: Any):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.detail = detail


class DataError(AlError):
    """Raised by dataset ingestion, splitting, and preprocessing."""


class ModelError(AlError):
    """Raised by classifier construction, training, and serialization."""


class UncertaintyError(AlError):
    """Raised by the scoring and ranking kernel."""


class MetricsError(AlError):
    """Raised by evaluation routines."""


class EngineError(AlError):
    """Raised by the active-learning session engine."""
