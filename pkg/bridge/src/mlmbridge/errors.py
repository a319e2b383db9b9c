"""Request-level exceptions; rpc.py maps each to a protocol error code."""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for failures attributable to a single request."""


class ContractError(BridgeError):
    """The request violates an operation precondition (bad position,
    missing mask, unknown id, empty word)."""


class SequenceOverflow(BridgeError):
    """The subword sequence does not fit the model's position limit.

    The message encodes ``required=<n> limit=<m>`` so both values survive
    the protocol's {code, message} error frames.
    """

    def __init__(self, required: int, limit: int):
        super().__init__(f"sequence overflow: required={required} limit={limit}")
        self.required = required
        self.limit = limit
