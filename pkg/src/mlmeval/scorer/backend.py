"""The backend interface every masked LM must satisfy.

A backend exposes five operations: session metadata, word-to-subword
tokenization with alignment, joint scoring of masked positions, final-layer
embedding extraction, and detokenization. Scores are log-probabilities (a
finite floor stands in for log 0); candidate lists are sorted by score
descending with ties broken by ascending subword id.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from mlmeval.errors import ContractViolation

# Substitute for log(0): keeps frames strict JSON and gives softmax weight 0.
LOG_ZERO = -1.0e9

# position -> top-k (subword_id, log-probability), best first
TopK = dict[int, list[tuple[int, float]]]


@dataclass(frozen=True)
class ModelInfo:
    hidden_size: int
    vocab_size: int
    max_seq_len: int
    mask_id: int
    cls_id: int
    sep_id: int
    unk_id: int
    lowercases: bool

    def __post_init__(self):
        if self.hidden_size <= 0:
            raise ValueError(f"hidden_size must be positive, got {self.hidden_size}")
        specials = (self.mask_id, self.cls_id, self.sep_id, self.unk_id)
        if len(set(specials)) != 4:
            raise ValueError(f"special ids must be pairwise distinct, got {specials}")
        if any(not 0 <= s < self.vocab_size for s in specials):
            raise ValueError(f"special ids must lie in [0, vocab_size), got {specials}")


@dataclass(frozen=True)
class Alignment:
    """Word -> contiguous subword span, as half-open [start, end) index pairs
    into the id sequence (specials excluded from all spans)."""

    spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.spans)

    def positions(self, word_index: int) -> range:
        start, end = self.spans[word_index]
        return range(start, end)

    def all_positions(self) -> list[int]:
        return [p for span in self.spans for p in range(span[0], span[1])]


class Backend(abc.ABC):
    """Uniform handle on a masked language model.

    Implementations must be deterministic: identical requests yield identical
    responses for the lifetime of the handle.
    """

    @abc.abstractmethod
    def model_info(self) -> ModelInfo:
        """Constant session metadata; repeated calls agree."""

    @abc.abstractmethod
    def tokenize(self, words: list[str]) -> tuple[list[int], Alignment]:
        """Map words to subword ids (with leading CLS and trailing SEP) and
        per-word spans. OOV pieces map to unk_id; sequences longer than
        max_seq_len raise SequenceTooLongError."""

    @abc.abstractmethod
    def score_masked(self, ids: list[int], positions: list[int], k: int) -> TopK:
        """Top-k candidates for each masked position from one joint
        evaluation. Every queried position must hold mask_id."""

    @abc.abstractmethod
    def embed(self, ids: list[int], positions: list[int]) -> list[np.ndarray]:
        """Final-encoder-layer vector (hidden_size floats) per position."""

    @abc.abstractmethod
    def detokenize(self, ids: list[int]) -> str:
        """Join subwords back into text (continuation pieces merged)."""

    def close(self) -> None:  # most backends hold no resources
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def check_words(words: list[str]) -> None:
    for i, w in enumerate(words):
        if not isinstance(w, str) or w == "":
            raise ContractViolation(f"word {i} is empty or not a string")


def check_positions(ids: list[int], positions: list[int]) -> None:
    for p in positions:
        if not 0 <= p < len(ids):
            raise ContractViolation(f"position {p} out of range for sequence of {len(ids)}")


def check_masked_request(ids: list[int], positions: list[int], k: int, mask_id: int) -> None:
    if k < 1:
        raise ContractViolation(f"k must be >= 1, got {k}")
    check_positions(ids, positions)
    for p in positions:
        if ids[p] != mask_id:
            raise ContractViolation(f"position {p} holds id {ids[p]}, not mask_id {mask_id}")
