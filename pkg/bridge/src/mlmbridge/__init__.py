"""Serve a pretrained masked language model over a JSON line protocol.

The server wraps a Hugging Face checkpoint (tokenizer + masked-LM head) and
answers five methods: model_info, tokenize, score_masked, embed, detokenize.
Clients talk newline-delimited JSON over the process's standard streams or
HTTP POST to /v1/rpc; see rpc.py for the frame format.
"""

from mlmbridge.errors import BridgeError, ContractError, SequenceOverflow
from mlmbridge.model import LOG_ZERO, MaskedLMModel, ModelInfo

__all__ = [
    "BridgeError",
    "ContractError",
    "SequenceOverflow",
    "LOG_ZERO",
    "MaskedLMModel",
    "ModelInfo",
]
