"""CoNLL-U treebank ingestion.

Keeps exactly what the evaluation tasks need: surface text, UPOS, HEAD,
DEPREL and document boundaries. Multiword-token range lines (id ``3-4``)
contribute to the fallback surface text only; empty nodes (id ``5.1``) are
dropped entirely. Everything is immutable after parsing, so treebanks can be
shared freely across threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)

N_COLUMNS = 10


class ConlluParseError(ValueError):
    """Structurally broken CoNLL-U input; the message names the file line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Token:
    """One syntactic word row. ``head`` is 0 for the root attachment."""

    id: int
    form: str
    upos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    sent_id: str
    text: str
    index_in_doc: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def root_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.tokens if t.head == 0)

    @property
    def root_id(self) -> int | None:
        """Id of the unique root; None when the tree is rootless or has
        several roots (such sentences stay usable for cloze/generation but
        carry no main-auxiliary labels)."""
        roots = self.root_ids
        return roots[0] if len(roots) == 1 else None


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Treebank:
    documents: tuple[Document, ...]

    def sentences(self) -> Iterator[Sentence]:
        for doc in self.documents:
            yield from doc.sentences

    def n_sentences(self) -> int:
        return sum(len(d.sentences) for d in self.documents)


def _surface_text(tokens: list[Token], mwt_ranges: dict[int, tuple[int, str]]) -> str:
    # Fallback when no "# text" comment exists: space-joined forms, with a
    # multiword surface form standing in for the words it covers.
    parts: list[str] = []
    skip_until = 0
    for tok in tokens:
        if tok.id <= skip_until:
            continue
        if tok.id in mwt_ranges:
            end, form = mwt_ranges[tok.id]
            parts.append(form)
            skip_until = end
        else:
            parts.append(tok.form)
    return " ".join(parts)


def _parse_block(
    lines: list[tuple[int, str]],
) -> tuple[list[Token], dict[str, str], dict[int, tuple[int, str]]]:
    """One blank-line-delimited block -> (word rows, comments, MWT ranges)."""
    tokens: list[Token] = []
    comments: dict[str, str] = {}
    mwt_ranges: dict[int, tuple[int, str]] = {}
    seen_ids: set[int] = set()
    next_id = 1

    for line_no, line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                comments[key.strip()] = value.strip()
            else:
                comments[body] = ""
            continue

        cols = line.split("\t")
        if len(cols) != N_COLUMNS:
            raise ConlluParseError(
                line_no, f"expected {N_COLUMNS} tab-separated columns, got {len(cols)}"
            )
        id_col, form, _lemma, upos, _xpos, _feats, head_col, deprel = cols[:8]

        if "-" in id_col:  # multiword range: surface only
            lo_s, _, hi_s = id_col.partition("-")
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                raise ConlluParseError(line_no, f"bad multiword range id {id_col!r}") from None
            mwt_ranges[lo] = (hi, form)
            continue
        if "." in id_col:  # empty node: dropped
            continue

        try:
            tok_id = int(id_col)
        except ValueError:
            raise ConlluParseError(line_no, f"non-integer token id {id_col!r}") from None
        try:
            head = int(head_col)
        except ValueError:
            raise ConlluParseError(line_no, f"non-integer head {head_col!r}") from None

        if tok_id < 1:
            raise ConlluParseError(line_no, f"token id must be >= 1, got {tok_id}")
        if tok_id in seen_ids:
            raise ConlluParseError(line_no, f"duplicate token id {tok_id}")
        if tok_id != next_id:
            raise ConlluParseError(
                line_no, f"token ids not consecutive: expected {next_id}, got {tok_id}"
            )
        if head < 0:
            raise ConlluParseError(line_no, f"negative head {head}")
        if head == tok_id:
            raise ConlluParseError(line_no, f"token {tok_id} is its own head")
        if not form:
            raise ConlluParseError(line_no, f"empty form at token {tok_id}")

        seen_ids.add(tok_id)
        next_id += 1
        tokens.append(Token(id=tok_id, form=form, upos=upos, head=head, deprel=deprel))

    return tokens, comments, mwt_ranges


def parse_conllu(text: str) -> Treebank:
    """Parse CoNLL-U text into an immutable Treebank.

    ``# newdoc`` comments open documents; without any, the whole input is a
    single document (empty input gives zero documents). Raises
    ConlluParseError naming the offending line for malformed rows.
    """
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.strip() == "":
            if current:
                blocks.append(current)
                current = []
        else:
            current.append((line_no, line))
    if current:
        blocks.append(current)

    documents: list[Document] = []
    cur_doc_id: str | None = None
    cur_sentences: list[Sentence] = []
    n_docs = 0
    sent_counter = 0

    def close_document() -> None:
        nonlocal cur_doc_id, cur_sentences
        if cur_doc_id is not None:
            documents.append(Document(doc_id=cur_doc_id, sentences=tuple(cur_sentences)))
        cur_doc_id = None
        cur_sentences = []

    for block in blocks:
        tokens, comments, mwt_ranges = _parse_block(block)

        newdoc_key = next((k for k in comments if k == "newdoc" or k.startswith("newdoc ")), None)
        if newdoc_key is not None:
            close_document()
            n_docs += 1
            cur_doc_id = comments[newdoc_key] or f"doc{n_docs}"

        if not tokens:
            continue  # comment-only block; newdoc markers above still apply

        if cur_doc_id is None:  # sentences before any newdoc marker
            n_docs += 1
            cur_doc_id = f"doc{n_docs}"

        sent_counter += 1
        sent_id = comments.get("sent_id") or f"s{sent_counter}"
        text_comment = comments.get("text", "")
        surface = text_comment if text_comment else _surface_text(tokens, mwt_ranges)

        sentence = Sentence(
            tokens=tuple(tokens),
            sent_id=sent_id,
            text=surface,
            index_in_doc=len(cur_sentences),
        )
        if len(sentence.root_ids) > 1:
            logger.warning(
                "sentence %s has %d root tokens; excluded from probe labeling",
                sent_id,
                len(sentence.root_ids),
            )
        cur_sentences.append(sentence)

    close_document()
    return Treebank(documents=tuple(documents))


def parse_conllu_file(path: str | Path) -> Treebank:
    return parse_conllu(Path(path).read_text(encoding="utf-8"))


def filter_sentences(treebank: Treebank, min_tokens: int, max_tokens: int) -> list[Sentence]:
    """Sentences with min_tokens <= token count <= max_tokens, in corpus order."""
    if not (1 <= min_tokens <= max_tokens):
        raise ValueError(f"need 1 <= min_tokens <= max_tokens, got {min_tokens}..{max_tokens}")
    return [s for s in treebank.sentences() if min_tokens <= len(s.tokens) <= max_tokens]
