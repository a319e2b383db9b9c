"""Shared exception types."""

from __future__ import annotations


class ContractViolation(ValueError):
    """An operation was called in a way its contract forbids (bad position,
    missing mask, mismatched vector length, unpredicted item, ...)."""


class SequenceTooLongError(RuntimeError):
    """A subword sequence does not fit the backend's max_seq_len.

    The message encodes ``required=<n> limit=<m>`` so the value survives the
    wire protocol's {code, message} error frames.
    """

    def __init__(self, required: int, limit: int):
        super().__init__(f"sequence overflow: required={required} limit={limit}")
        self.required = required
        self.limit = limit


class BackendError(RuntimeError):
    """A backend failed while serving a request."""


class BackendConnectionError(BackendError):
    """The backend process or endpoint is unreachable or went away."""


class WireProtocolError(BackendError):
    """The remote side violated the wire protocol (bad frame, wrong id, ...)."""

    def __init__(self, message: str, code: int | None = None):
        super().__init__(message)
        self.code = code


class TrainingDiverged(RuntimeError):
    """Probe training hit a non-finite loss; message names the epoch."""
