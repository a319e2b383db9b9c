"""Context-seeded sentence generation with a masked LM.

Generation slots are sampled at document granularity: a slot is a sentence
with both neighbors present, the neighbors become left/right context, and the
window length is the original sentence's subword count clamped to [5, 15].
The window starts as all mask symbols; each iteration re-masks one uniformly
chosen position and refills it from the model, sampling from the temperature-
scaled top-k softmax during burn-in and greedily afterwards.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from random import Random

from mlmeval.conllu import Treebank
from mlmeval.errors import SequenceTooLongError
from mlmeval.scorer.backend import Backend
from mlmeval.util import derive_seed

logger = logging.getLogger(__name__)

WINDOW_MIN = 5
WINDOW_MAX = 15

DEFAULT_N_DOCS = 30
DEFAULT_PER_DOC = 2
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_BURN_IN = 250
DEFAULT_TOP_K = 100
DEFAULT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class GenerationTask:
    doc_id: str
    sent_id: str
    original_text: str
    left_text: str
    right_text: str
    window_len: int  # clamp(subword length of the original sentence, 5, 15)
    rng_seed: int


@dataclass(frozen=True)
class GenerationResult:
    window_ids: tuple[int, ...]
    text: str
    iterations_used: int
    converged: bool


def sample_tasks(treebank: Treebank, backend: Backend, n_docs: int = DEFAULT_N_DOCS,
                 per_doc: int = DEFAULT_PER_DOC, seed: int = 0) -> list[GenerationTask]:
    """Draw documents without replacement, then eligible sentences (those with
    both neighbors) within each; shortfalls are logged, not errors."""
    rng = Random(seed)
    documents = list(treebank.documents)
    chosen_docs = rng.sample(documents, min(n_docs, len(documents)))
    if len(chosen_docs) < n_docs:
        logger.info("only %d of %d requested documents available", len(chosen_docs), n_docs)

    tasks: list[GenerationTask] = []
    for doc in chosen_docs:
        eligible = list(range(1, len(doc.sentences) - 1))
        picked = rng.sample(eligible, min(per_doc, len(eligible)))
        if len(picked) < per_doc:
            logger.info("document %s yields %d of %d sentences", doc.doc_id, len(picked), per_doc)
        for idx in sorted(picked):
            sentence = doc.sentences[idx]
            try:
                ids, _ = backend.tokenize(sentence.forms)
            except SequenceTooLongError as exc:
                logger.info("skipping %s: %s", sentence.sent_id, exc)
                continue
            subword_len = len(ids) - 2  # drop CLS and SEP
            tasks.append(
                GenerationTask(
                    doc_id=doc.doc_id,
                    sent_id=sentence.sent_id,
                    original_text=sentence.text,
                    left_text=doc.sentences[idx - 1].text,
                    right_text=doc.sentences[idx + 1].text,
                    window_len=min(WINDOW_MAX, max(WINDOW_MIN, subword_len)),
                    rng_seed=derive_seed(seed, len(tasks)),
                )
            )
    return tasks


def assemble_input(task: GenerationTask, window_ids: list[int],
                   backend: Backend) -> tuple[list[int], list[int]]:
    """CLS + left context + window + right context + SEP, trimming context
    from the outer ends (longer side first, ties left) when over the length
    limit; the window is never trimmed. Returns (ids, window positions)."""
    if len(window_ids) != task.window_len:
        raise ValueError(f"window has {len(window_ids)} ids, task wants {task.window_len}")
    info = backend.model_info()
    left = backend.tokenize(task.left_text.split())[0][1:-1]
    right = backend.tokenize(task.right_text.split())[0][1:-1]

    budget = info.max_seq_len - 2 - task.window_len
    if budget < 0:
        raise SequenceTooLongError(required=task.window_len + 2, limit=info.max_seq_len)
    while len(left) + len(right) > budget:
        if len(left) >= len(right) and left:
            left = left[1:]
        elif right:
            right = right[:-1]
        else:
            break

    ids = [info.cls_id] + left + list(window_ids) + right + [info.sep_id]
    start = 1 + len(left)
    return ids, list(range(start, start + task.window_len))


def _sample_candidate(candidates: list[tuple[int, float]], temperature: float,
                      rng: Random) -> int:
    scores = [s / temperature for _, s in candidates]
    top = max(scores)
    weights = [math.exp(s - top) for s in scores]
    return rng.choices([i for i, _ in candidates], weights=weights, k=1)[0]


def gibbs_generate(task: GenerationTask, backend: Backend,
                   max_iterations: int = DEFAULT_MAX_ITERATIONS,
                   burn_in: int = DEFAULT_BURN_IN, top_k: int = DEFAULT_TOP_K,
                   temperature: float = DEFAULT_TEMPERATURE,
                   seed: int | None = None) -> GenerationResult:
    """Run the one-position-per-iteration refill loop over the task's window.

    Early stop with converged=True once the window has stayed unchanged for
    window_len consecutive post-burn-in iterations.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    info = backend.model_info()
    rng = Random(task.rng_seed if seed is None else seed)
    window = [info.mask_id] * task.window_len

    iterations_used = 0
    converged = False
    stable = 0
    for iteration in range(max_iterations):
        p = rng.randrange(task.window_len)
        before = window[p]
        window[p] = info.mask_id
        ids, window_positions = assemble_input(task, window, backend)
        position = window_positions[p]
        candidates = backend.score_masked(ids, [position], top_k)[position]
        if iteration < burn_in:
            chosen = _sample_candidate(candidates, temperature, rng)
        else:
            chosen = candidates[0][0]
        window[p] = chosen
        iterations_used = iteration + 1
        if iteration >= burn_in and chosen == before:
            stable += 1
        else:
            stable = 0
        if stable >= task.window_len:
            converged = True
            break

    return GenerationResult(
        window_ids=tuple(window),
        text=backend.detokenize(window),
        iterations_used=iterations_used,
        converged=converged,
    )


def render_context_sheet(task: GenerationTask, result: GenerationResult) -> str:
    """Generated text in bold markers between its contexts, one line."""
    return f"{task.left_text} **{result.text}** {task.right_text}"
