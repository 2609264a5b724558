"""Exception types shared across the package."""

from __future__ import annotations


class RefrainError(Exception):
    """Base class for all package errors."""


class NotFoundError(RefrainError):
    """An entity (song, node, session, output, ...) does not exist."""


class InvalidRequestError(RefrainError):
    """A structurally invalid request, distinct from a policy denial."""

    def __init__(self, *reasons: str):
        self.reasons = tuple(reasons)
        super().__init__("; ".join(reasons) if reasons else "invalid request")


class ConfigurationError(RefrainError):
    """Bad or missing configuration (paths, tariffs, mappings)."""


class ConservationError(RefrainError):
    """A ledger entry whose fee does not equal the sum of its destinations."""
