"""Cloze test: mask a fraction of words per sentence, predict all masked
positions jointly, score at the subword level.

Word selection is seeded and counts as max(1, round-half-up(rate * n_words)),
with the rate read as the decimal its repr shows so boundary cases cannot
drift with binary floats. Every subword of a selected word is masked; nothing
else is.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from math import floor
from random import Random

from mlmeval.conllu import Sentence
from mlmeval.errors import ContractViolation
from mlmeval.scorer.backend import Backend

DEFAULT_MASK_RATE = 0.15


@dataclass(frozen=True)
class ClozeItem:
    sent_id: str
    words: tuple[str, ...]
    masked_word_indices: tuple[int, ...]
    ids: tuple[int, ...]  # full subword sequence with mask_id at masked spans
    spans: tuple[tuple[int, int], ...]  # word -> [start, end) into ids
    masked_positions: tuple[int, ...]  # ascending
    gold: tuple[int, ...]  # displaced ids, aligned with masked_positions
    rng_seed: int
    predictions: tuple[int, ...] | None = None  # top-1 ids after prediction

    @property
    def n_masked(self) -> int:
        return len(self.masked_positions)


def mask_word_count(n_words: int, rate: float) -> int:
    """max(1, round-half-up(rate * n_words)), exact in the decimal rate."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    exact = Fraction(str(rate)) * n_words
    return max(1, floor(exact + Fraction(1, 2)))


def select_mask_words(sentence: Sentence, rate: float = DEFAULT_MASK_RATE,
                      seed: int = 0) -> list[int]:
    """Seeded uniform draw of word indices to mask, sorted ascending."""
    n = len(sentence.tokens)
    count = mask_word_count(n, rate)
    return sorted(Random(seed).sample(range(n), count))


def build_cloze_item(sentence: Sentence, word_indices: list[int],
                     backend: Backend, rng_seed: int = 0) -> ClozeItem:
    """Tokenize the sentence and mask every subword of the selected words,
    recording the displaced ids as gold."""
    n = len(sentence.tokens)
    if len(set(word_indices)) != len(word_indices):
        raise ContractViolation("word indices must be distinct")
    if any(not 0 <= i < n for i in word_indices):
        raise ContractViolation(f"word index out of range for sentence of {n} words")

    ids, alignment = backend.tokenize(sentence.forms)
    mask_id = backend.model_info().mask_id
    masked = list(ids)
    masked_positions: list[int] = []
    gold: list[int] = []
    for wi in sorted(word_indices):
        for p in alignment.positions(wi):
            masked_positions.append(p)
            gold.append(ids[p])
            masked[p] = mask_id

    return ClozeItem(
        sent_id=sentence.sent_id,
        words=tuple(sentence.forms),
        masked_word_indices=tuple(sorted(word_indices)),
        ids=tuple(masked),
        spans=alignment.spans,
        masked_positions=tuple(masked_positions),
        gold=tuple(gold),
        rng_seed=rng_seed,
    )


def predict_cloze(item: ClozeItem, backend: Backend, k: int = 1) -> ClozeItem:
    """Fill predictions from a single joint score_masked call (no iterative
    refilling); the top-1 candidate per position becomes the prediction."""
    if item.predictions is not None:
        raise ContractViolation(f"item {item.sent_id} already predicted")
    topk = backend.score_masked(list(item.ids), list(item.masked_positions), k)
    predictions = tuple(topk[p][0][0] for p in item.masked_positions)
    return replace(item, predictions=predictions)


def cloze_accuracy(items: list[ClozeItem]) -> float:
    """Micro-averaged share of masked subword positions predicted exactly."""
    total = 0
    hits = 0
    for item in items:
        if item.predictions is None:
            raise ContractViolation(f"item {item.sent_id} has no predictions")
        total += item.n_masked
        hits += sum(p == g for p, g in zip(item.predictions, item.gold))
    if total == 0:
        raise ContractViolation("no masked positions to score")
    return hits / total


def render_cloze(item: ClozeItem, backend: Backend) -> str:
    """Word sequence with each masked word shown as [predicted~gold]."""
    if item.predictions is None:
        raise ContractViolation(f"item {item.sent_id} has no predictions")
    predicted_at = dict(zip(item.masked_positions, item.predictions))
    masked_words = set(item.masked_word_indices)
    parts = []
    for wi, word in enumerate(item.words):
        if wi in masked_words:
            span_ids = [predicted_at[p] for p in range(*item.spans[wi])]
            parts.append(f"[{backend.detokenize(span_ids)}~{word}]")
        else:
            parts.append(word)
    return " ".join(parts)
