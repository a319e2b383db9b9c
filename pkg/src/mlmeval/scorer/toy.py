"""Deterministic in-process backends used as test oracles and offline stand-ins.

All of them build their vocabulary from a corpus of sentences. By default a
word is a single subword; CharPieceBackend instead splits words into
character pieces (``##``-continued) so multi-subword alignment paths get
exercised without a real WordPiece vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from mlmeval.conllu import Sentence
from mlmeval.errors import ContractViolation, SequenceTooLongError
from mlmeval.scorer.backend import (
    LOG_ZERO,
    Alignment,
    Backend,
    ModelInfo,
    TopK,
    check_masked_request,
    check_positions,
    check_words,
)

CLS, SEP, MASK, UNK = 0, 1, 2, 3
_SPECIAL_STRINGS = {CLS: "[CLS]", SEP: "[SEP]", MASK: "[MASK]", UNK: "[UNK]"}
N_SPECIALS = 4


class WordVocabBackend(Backend):
    """Base for the toys: sorted piece vocabulary after 4 special ids."""

    def __init__(self, corpus: list[Sentence], hidden_size: int = 16,
                 max_seq_len: int = 512, seed: int = 0,
                 extra_words: list[str] = ()):
        self._word_lists = [s.forms for s in corpus]
        all_words = [w for sent in self._word_lists for w in sent] + list(extra_words)
        pieces = sorted({p for w in all_words for p in self._split(w)})
        self._id_of = {p: N_SPECIALS + i for i, p in enumerate(pieces)}
        self._piece_of = dict(_SPECIAL_STRINGS)
        self._piece_of.update({i: p for p, i in self._id_of.items()})
        self._info = ModelInfo(
            hidden_size=hidden_size,
            vocab_size=N_SPECIALS + len(pieces),
            max_seq_len=max_seq_len,
            mask_id=MASK,
            cls_id=CLS,
            sep_id=SEP,
            unk_id=UNK,
            lowercases=False,
        )
        self._seed = seed

    @staticmethod
    def _split(word: str) -> list[str]:
        return [word]

    def word_id(self, word: str) -> int:
        return self._id_of.get(word, UNK)

    def model_info(self) -> ModelInfo:
        return self._info

    def tokenize(self, words: list[str]) -> tuple[list[int], Alignment]:
        check_words(words)
        ids = [CLS]
        spans = []
        for word in words:
            piece_ids = [self._id_of.get(p, UNK) for p in self._split(word)]
            spans.append((len(ids), len(ids) + len(piece_ids)))
            ids.extend(piece_ids)
        ids.append(SEP)
        if len(ids) > self._info.max_seq_len:
            raise SequenceTooLongError(required=len(ids), limit=self._info.max_seq_len)
        return ids, Alignment(spans=tuple(spans))

    def detokenize(self, ids: list[int]) -> str:
        parts: list[str] = []
        for i in ids:
            if i not in self._piece_of:
                raise ContractViolation(f"unknown subword id {i}")
            piece = self._piece_of[i]
            if piece.startswith("##") and parts:
                parts[-1] += piece[2:]
            else:
                parts.append(piece)
        return " ".join(parts)

    def embed(self, ids: list[int], positions: list[int]) -> list[np.ndarray]:
        check_positions(ids, positions)
        out = []
        for p in positions:
            rng = np.random.default_rng([self._seed, ids[p]])
            out.append(rng.standard_normal(self._info.hidden_size))
        return out

    def _log_scores(self, ids: list[int], position: int) -> list[tuple[int, float]]:
        raise NotImplementedError

    def score_masked(self, ids: list[int], positions: list[int], k: int) -> TopK:
        check_masked_request(ids, positions, k, self._info.mask_id)
        result: TopK = {}
        for p in positions:
            scored = sorted(self._log_scores(ids, p), key=lambda c: (-c[1], c[0]))
            result[p] = scored[:k]
        return result


class UnigramBackend(WordVocabBackend):
    """Scores every masked position by corpus piece frequency, context-blind."""

    def __init__(self, corpus: list[Sentence], **kwargs):
        if not corpus:
            raise ValueError("unigram backend needs a non-empty corpus")
        super().__init__(corpus, **kwargs)
        counts: Counter[int] = Counter()
        for sent in self._word_lists:
            for w in sent:
                counts.update(self._id_of[p] for p in self._split(w))
        total = sum(counts.values())
        self._logp = {i: math.log(c / total) for i, c in counts.items()}

    def _log_scores(self, ids, position):
        return list(self._logp.items())


class CharPieceBackend(UnigramBackend):
    """Unigram scoring over character pieces: a word is its first character
    plus ``##``-prefixed continuation characters."""

    def __init__(self, corpus: list[Sentence], max_seq_len: int = 2048, **kwargs):
        super().__init__(corpus, max_seq_len=max_seq_len, **kwargs)

    @staticmethod
    def _split(word: str) -> list[str]:
        return [word[0]] + [f"##{c}" for c in word[1:]]


class EchoBackend(WordVocabBackend):
    """Answers masked queries from stored gold sequences.

    The gold table maps position contexts to subword ids: a query matches the
    first stored sequence of the same length that agrees at every unmasked
    position, and the gold id at a queried position gets probability one.
    Positions with no matching stored context are a contract error.
    """

    def __init__(self, corpus: list[Sentence], **kwargs):
        super().__init__(corpus, **kwargs)
        self._stored = [tuple(self.tokenize(sent)[0]) for sent in self._word_lists]

    def _gold(self, ids: list[int], position: int) -> int:
        for seq in self._stored:
            if len(seq) != len(ids):
                continue
            if all(a == b for a, b in zip(ids, seq) if a != MASK):
                return seq[position]
        raise ContractViolation(f"no gold configured for position {position} in this context")

    def _log_scores(self, ids, position):
        gold = self._gold(ids, position)
        scores = [(gold, 0.0)]
        scores.extend((i, LOG_ZERO) for i in self._id_of.values() if i != gold)
        return scores


class ConstantBackend(WordVocabBackend):
    """Always ranks one fixed word first, everywhere."""

    def __init__(self, corpus: list[Sentence], constant_word: str, **kwargs):
        super().__init__(corpus, extra_words=[constant_word], **kwargs)
        self.constant_id = self._id_of[constant_word]

    def _log_scores(self, ids, position):
        scores = [(self.constant_id, 0.0)]
        scores.extend((i, LOG_ZERO) for i in self._id_of.values() if i != self.constant_id)
        return scores


class CountingBackend(Backend):
    """Delegating wrapper that counts backend evaluations per method."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls: Counter[str] = Counter()

    def model_info(self):
        self.calls["model_info"] += 1
        return self.inner.model_info()

    def tokenize(self, words):
        self.calls["tokenize"] += 1
        return self.inner.tokenize(words)

    def score_masked(self, ids, positions, k):
        self.calls["score_masked"] += 1
        return self.inner.score_masked(ids, positions, k)

    def embed(self, ids, positions):
        self.calls["embed"] += 1
        return self.inner.embed(ids, positions)

    def detokenize(self, ids):
        self.calls["detokenize"] += 1
        return self.inner.detokenize(ids)


def make_echo_backend(corpus: list[Sentence], **kwargs) -> EchoBackend:
    """Echo oracle: the original subword is returned with probability one at
    every masked position of any corpus sentence."""
    return EchoBackend(corpus, **kwargs)


def make_unigram_backend(corpus: list[Sentence], **kwargs) -> UnigramBackend:
    """Frequency oracle: the corpus-modal word wins every masked position."""
    return UnigramBackend(corpus, **kwargs)
