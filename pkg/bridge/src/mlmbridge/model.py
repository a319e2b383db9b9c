"""Checkpoint wrapper implementing the five scoring operations.

Tokenization runs word by word so every input word maps to a contiguous
subword span; scoring masks are filled from one joint forward pass with
log-softmax over the full vocabulary before top-k truncation; embeddings
come from the final encoder layer. Inference runs under
torch.inference_mode behind a lock, so identical requests give identical
responses regardless of caller interleaving.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import torch

from mlmbridge.errors import ContractError, SequenceOverflow

# Stands in for log(0) on the wire: finite, so frames stay strict JSON,
# and small enough to carry softmax weight 0.
LOG_ZERO = -1.0e9

# Tokenizers with no configured length limit report a huge sentinel value.
_NO_LIMIT = 10**12

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


class MaskedLMModel:
    """One loaded checkpoint: tokenizer plus masked-LM encoder."""

    def __init__(self, tokenizer, model, device: str = "cpu"):
        self._tokenizer = tokenizer
        self._device = torch.device(device)
        self._model = model.to(self._device)
        self._model.eval()
        self._lock = threading.Lock()
        limit = int(model.config.max_position_embeddings)
        if 0 < tokenizer.model_max_length < _NO_LIMIT:
            limit = min(limit, int(tokenizer.model_max_length))
        self._info = ModelInfo(
            hidden_size=int(model.config.hidden_size),
            vocab_size=int(model.config.vocab_size),
            max_seq_len=limit,
            mask_id=int(tokenizer.mask_token_id),
            cls_id=int(tokenizer.cls_token_id),
            sep_id=int(tokenizer.sep_token_id),
            unk_id=int(tokenizer.unk_token_id),
            lowercases=bool(getattr(tokenizer, "do_lower_case", False)),
        )

    @classmethod
    def from_pretrained(cls, checkpoint: str, device: str = "cpu") -> MaskedLMModel:
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForMaskedLM.from_pretrained(checkpoint)
        return cls(tokenizer, model, device=device)

    def model_info(self) -> ModelInfo:
        return self._info

    def tokenize(self, words: list[str]) -> tuple[list[int], tuple[tuple[int, int], ...]]:
        """Subword ids with leading CLS and trailing SEP, plus one half-open
        [start, end) span per word indexing into the id list."""
        info = self._info
        ids = [info.cls_id]
        spans = []
        for i, word in enumerate(words):
            if not isinstance(word, str) or word == "":
                raise ContractError(f"word {i} is empty or not a string")
            pieces = self._tokenizer.tokenize(word)
            # normalization can strip a word to nothing; keep its span
            # non-empty by standing in the unknown token
            piece_ids = self._tokenizer.convert_tokens_to_ids(pieces) if pieces else [info.unk_id]
            spans.append((len(ids), len(ids) + len(piece_ids)))
            ids.extend(piece_ids)
        ids.append(info.sep_id)
        if len(ids) > info.max_seq_len:
            raise SequenceOverflow(required=len(ids), limit=info.max_seq_len)
        return ids, tuple(spans)

    def score_masked(self, ids: list[int], positions: list[int], k: int) -> TopK:
        """Top-k (id, log-probability) per masked position from one forward
        pass; lists sorted by score descending, ties by ascending id."""
        if k < 1:
            raise ContractError(f"k must be >= 1, got {k}")
        self._check_positions(ids, positions)
        for p in positions:
            if ids[p] != self._info.mask_id:
                raise ContractError(
                    f"position {p} holds id {ids[p]}, not mask_id {self._info.mask_id}"
                )
        logits = self._forward(ids).logits[0]
        log_probs = torch.log_softmax(logits, dim=-1).numpy(force=True)
        result: TopK = {}
        for p in positions:
            row = log_probs[p]
            # stable sort of the negated row ranks by score descending with
            # equal scores kept in ascending-id order
            order = np.argsort(-row, kind="stable")[:k]
            result[p] = [(int(i), max(float(row[i]), LOG_ZERO)) for i in order]
        return result

    def embed(self, ids: list[int], positions: list[int]) -> list[np.ndarray]:
        """Final-encoder-layer vector (hidden_size floats) per position."""
        self._check_positions(ids, positions)
        out = self._forward(ids, need_hidden=True)
        final = out.hidden_states[-1][0].numpy(force=True)
        return [final[p].astype(float) for p in positions]

    def detokenize(self, ids: list[int]) -> str:
        """Join subwords back into text per the tokenizer's convention
        (continuation pieces merged onto the previous piece)."""
        # the logits dimension can exceed the tokenizer's table; only ids
        # with a surface form are renderable
        limit = len(self._tokenizer)
        for i in ids:
            if not isinstance(i, int) or not 0 <= i < limit:
                raise ContractError(f"unknown subword id {i}")
        tokens = self._tokenizer.convert_ids_to_tokens(list(ids))
        return self._tokenizer.convert_tokens_to_string(tokens)

    def _check_positions(self, ids: list[int], positions: list[int]) -> None:
        for i in ids:
            if not isinstance(i, int) or not 0 <= i < self._info.vocab_size:
                raise ContractError(f"unknown subword id {i}")
        for p in positions:
            if not 0 <= p < len(ids):
                raise ContractError(f"position {p} out of range for sequence of {len(ids)}")

    def _forward(self, ids: list[int], need_hidden: bool = False):
        if len(ids) > self._info.max_seq_len:
            raise SequenceOverflow(required=len(ids), limit=self._info.max_seq_len)
        input_ids = torch.tensor([ids], dtype=torch.long, device=self._device)
        with self._lock, torch.inference_mode():
            return self._model(input_ids=input_ids, output_hidden_states=need_hidden)
