from mlmeval.scorer.backend import Alignment, Backend, ModelInfo, TopK
from mlmeval.scorer.toy import (
    CharPieceBackend,
    ConstantBackend,
    CountingBackend,
    EchoBackend,
    UnigramBackend,
    make_echo_backend,
    make_unigram_backend,
)
from mlmeval.scorer.wire import HttpTransport, StdioTransport, WireBackend

__all__ = [
    "Alignment",
    "Backend",
    "ModelInfo",
    "TopK",
    "CharPieceBackend",
    "ConstantBackend",
    "CountingBackend",
    "EchoBackend",
    "UnigramBackend",
    "make_echo_backend",
    "make_unigram_backend",
    "HttpTransport",
    "StdioTransport",
    "WireBackend",
]
