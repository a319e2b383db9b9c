"""Masked language model evaluation over Universal Dependencies treebanks.

Three probes of increasing difficulty against any backend that speaks the
scorer interface: a main-auxiliary diagnostic classifier over contextual
embeddings, a masked-word cloze test, and Gibbs-sampling sentence generation,
plus collection and tabulation of human category judgments of the outputs.
"""

from mlmeval.conllu import Document, Sentence, Token, Treebank, parse_conllu, parse_conllu_file
from mlmeval.harness import RunConfig, make_backend, run
from mlmeval.scorer import (
    Alignment,
    Backend,
    EchoBackend,
    ModelInfo,
    UnigramBackend,
    WireBackend,
)

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "Backend",
    "Document",
    "EchoBackend",
    "ModelInfo",
    "RunConfig",
    "Sentence",
    "Token",
    "Treebank",
    "UnigramBackend",
    "WireBackend",
    "__version__",
    "make_backend",
    "parse_conllu",
    "parse_conllu_file",
    "run",
]
