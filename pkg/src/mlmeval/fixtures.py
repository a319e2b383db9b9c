"""Deterministic synthetic corpora for tests, demos, and offline runs.

The treebank fixture is a template-grammar corpus with the structural variety
the evaluation tasks need: several documents of several sentences each,
auxiliaries attached to the root, inside embedded clauses, and as roots
themselves, a frequency-skewed vocabulary (the determiner "the" dominates),
and sentence lengths from 4 to the mid-20s. Surface text always equals the
space-joined forms, so detokenized output is directly comparable.
"""

from __future__ import annotations

from random import Random

import numpy as np

from mlmeval.conllu import Treebank, parse_conllu
from mlmeval.probe import MAIN, OTHER, InstanceSource, ProbeInstance

DETERMINERS = ("the", "the", "the", "the", "a", "this")
NOUNS = ("cat", "dog", "bird", "tree", "house", "river", "stone", "cloud", "road", "door")
FINITE_VERBS = ("sees", "chased", "finds", "keeps", "watches")
BARE_VERBS = ("sleep", "run", "sing", "hide", "wait", "fall")
AUXILIARIES = ("will", "can", "must", "may", "should")
ADJECTIVES = ("small", "quiet", "bright", "gray", "odd")
ADVERBS = ("soundly", "quickly", "alone", "today", "nearby")
PREPOSITIONS = ("near", "under", "behind")

DEFAULT_N_DOCS = 6
DEFAULT_SENTENCES_PER_DOC = 10
DEFAULT_SEED = 7


class _Builder:
    """Accumulates (form, upos, head, deprel) rows; heads are 0-based row
    indices fixed up after the fact, None marking the root."""

    def __init__(self):
        self._rows: list[list] = []

    def add(self, form: str, upos: str, deprel: str, head: int | None = None) -> int:
        self._rows.append([form, upos, head, deprel])
        return len(self._rows) - 1

    def set_head(self, index: int, head: int) -> None:
        self._rows[index][2] = head

    def rows(self) -> list[tuple[int, str, str, int, str]]:
        roots = [i for i, r in enumerate(self._rows) if r[3] == "root"]
        assert len(roots) == 1, f"template produced {len(roots)} roots"
        out = []
        for i, (form, upos, head, deprel) in enumerate(self._rows):
            if deprel == "root":
                assert head is None, "root row must not have a head"
                head_id = 0
            else:
                assert head is not None, f"row {i} ({form}) never got a head"
                head_id = head + 1
            out.append((i + 1, form, upos, head_id, deprel))
        return out


def _noun_phrase(b: _Builder, rng: Random, deprel: str) -> int:
    det = b.add(rng.choice(DETERMINERS), "DET", "det")
    adjs = [b.add(rng.choice(ADJECTIVES), "ADJ", "amod")
            for _ in range(rng.choices((0, 1, 2), weights=(6, 3, 1))[0])]
    noun = b.add(rng.choice(NOUNS), "NOUN", deprel)
    for i in (det, *adjs):
        b.set_head(i, noun)
    return noun


def _prep_phrase(b: _Builder, rng: Random, attach_to: int) -> None:
    prep = b.add(rng.choice(PREPOSITIONS), "ADP", "case")
    noun = _noun_phrase(b, rng, "obl")
    b.set_head(prep, noun)
    b.set_head(noun, attach_to)


def _t_main_aux(b: _Builder, rng: Random) -> None:
    # "the cat will sleep soundly ." with the AUX attached to the root
    subj = _noun_phrase(b, rng, "nsubj")
    aux = b.add(rng.choice(AUXILIARIES), "AUX", "aux")
    verb = b.add(rng.choice(BARE_VERBS), "VERB", "root")
    b.set_head(subj, verb)
    b.set_head(aux, verb)
    if rng.random() < 0.5:
        b.add(rng.choice(ADVERBS), "ADV", "advmod", head=verb)
    if rng.random() < 0.4:
        _prep_phrase(b, rng, verb)
    b.add(".", "PUNCT", "punct", head=verb)


def _embedded_clause(b: _Builder, rng: Random, matrix_verb: int) -> None:
    # "... that the dog will hide" with the AUX attached below the root
    mark = b.add("that", "SCONJ", "mark")
    subj = _noun_phrase(b, rng, "nsubj")
    aux = b.add(rng.choice(AUXILIARIES), "AUX", "aux")
    verb = b.add(rng.choice(BARE_VERBS), "VERB", "ccomp", head=matrix_verb)
    for i in (mark, subj, aux):
        b.set_head(i, verb)


def _t_embedded_aux(b: _Builder, rng: Random) -> None:
    subj = _noun_phrase(b, rng, "nsubj")
    verb = b.add(rng.choice(FINITE_VERBS), "VERB", "root")
    b.set_head(subj, verb)
    _embedded_clause(b, rng, verb)
    b.add(".", "PUNCT", "punct", head=verb)


def _t_both_aux(b: _Builder, rng: Random) -> None:
    subj = _noun_phrase(b, rng, "nsubj")
    aux = b.add(rng.choice(AUXILIARIES), "AUX", "aux")
    verb = b.add("sees", "VERB", "root")
    b.set_head(subj, verb)
    b.set_head(aux, verb)
    _embedded_clause(b, rng, verb)
    b.add(".", "PUNCT", "punct", head=verb)


def _t_root_aux(b: _Builder, rng: Random) -> None:
    # Elliptical clause whose root is the AUX itself
    intj = b.add("well", "INTJ", "discourse")
    subj = _noun_phrase(b, rng, "nsubj")
    aux = b.add(rng.choice(AUXILIARIES), "AUX", "root")
    b.set_head(intj, aux)
    b.set_head(subj, aux)
    b.add(".", "PUNCT", "punct", head=aux)


def _t_plain(b: _Builder, rng: Random) -> None:
    subj = _noun_phrase(b, rng, "nsubj")
    verb = b.add(rng.choice(FINITE_VERBS), "VERB", "root")
    b.set_head(subj, verb)
    obj = _noun_phrase(b, rng, "obj")
    b.set_head(obj, verb)
    if rng.random() < 0.4:
        _prep_phrase(b, rng, verb)
    b.add(".", "PUNCT", "punct", head=verb)


def _t_listing(b: _Builder, rng: Random) -> None:
    # Coordinated objects stretch sentence length toward the 20s
    subj = _noun_phrase(b, rng, "nsubj")
    verb = b.add(rng.choice(FINITE_VERBS), "VERB", "root")
    b.set_head(subj, verb)
    first = _noun_phrase(b, rng, "obj")
    b.set_head(first, verb)
    n_extra = rng.randint(2, 4)
    for i in range(n_extra):
        if i < n_extra - 1:
            link = b.add(",", "PUNCT", "punct")
        else:
            link = b.add("and", "CCONJ", "cc")
        noun = _noun_phrase(b, rng, "conj")
        b.set_head(link, noun)
        b.set_head(noun, first)
    b.add(".", "PUNCT", "punct", head=verb)


_TEMPLATES = (
    (_t_main_aux, 30),
    (_t_embedded_aux, 24),
    (_t_both_aux, 14),
    (_t_root_aux, 8),
    (_t_plain, 16),
    (_t_listing, 8),
)


def fixture_conllu(n_docs: int = DEFAULT_N_DOCS,
                   sentences_per_doc: int = DEFAULT_SENTENCES_PER_DOC,
                   seed: int = DEFAULT_SEED) -> str:
    rng = Random(seed)
    templates = [t for t, _ in _TEMPLATES]
    weights = [w for _, w in _TEMPLATES]
    lines: list[str] = []
    for d in range(n_docs):
        doc_id = f"fixture-doc{d + 1}"
        lines.append(f"# newdoc id = {doc_id}")
        for s in range(sentences_per_doc):
            template = rng.choices(templates, weights=weights, k=1)[0]
            builder = _Builder()
            template(builder, rng)
            rows = builder.rows()
            lines.append(f"# sent_id = {doc_id}-s{s + 1}")
            lines.append("# text = " + " ".join(form for _, form, _, _, _ in rows))
            for tok_id, form, upos, head, deprel in rows:
                lines.append("\t".join(
                    [str(tok_id), form, form, upos, "_", "_", str(head), deprel, "_", "_"]
                ))
            lines.append("")
    return "\n".join(lines) + "\n"


def fixture_treebank(n_docs: int = DEFAULT_N_DOCS,
                     sentences_per_doc: int = DEFAULT_SENTENCES_PER_DOC,
                     seed: int = DEFAULT_SEED) -> Treebank:
    return parse_conllu(fixture_conllu(n_docs, sentences_per_doc, seed))


def separable_instances(n_train: int = 500, n_test: int = 500, hidden: int = 8,
                        margin: float = 1.0, seed: int = 0,
                        ) -> tuple[list[ProbeInstance], list[ProbeInstance]]:
    """Linearly separable probe data: coordinate 0 is at least ``margin`` from
    zero and its sign encodes the label; other coordinates are noise."""
    rng = np.random.default_rng(seed)

    def batch(n: int, tag: str) -> list[ProbeInstance]:
        vectors = rng.standard_normal((n, hidden))
        labels = rng.integers(0, 2, size=n)
        signs = np.where(labels == 0, 1.0, -1.0)
        vectors[:, 0] = signs * (margin + rng.random(n))
        return [
            ProbeInstance(
                vector=vectors[i],
                label=MAIN if labels[i] == 0 else OTHER,
                language="synthetic",
                source=InstanceSource(sent_id=f"{tag}{i}", token_id=1, subword_offset=0),
            )
            for i in range(n)
        ]

    return batch(n_train, "train-"), batch(n_test, "test-")
