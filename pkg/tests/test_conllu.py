import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlmeval.conllu import (
    ConlluParseError,
    filter_sentences,
    parse_conllu,
    parse_conllu_file,
)
from mlmeval.fixtures import fixture_conllu


def _row(tok_id, form, head, upos="NOUN", deprel="dep"):
    return "\t".join([str(tok_id), form, form, upos, "_", "_", str(head), deprel, "_", "_"])


def _sentence_block(forms, comments=()):
    lines = list(comments)
    for i, form in enumerate(forms, start=1):
        head = 0 if i == 1 else 1
        deprel = "root" if i == 1 else "dep"
        lines.append(_row(i, form, head, deprel=deprel))
    return "\n".join(lines)


def test_empty_input_gives_zero_documents():
    assert parse_conllu("").documents == ()
    assert parse_conllu("\n\n\n").documents == ()


def test_two_newdoc_markers_split_documents():
    text = "\n\n".join([
        _sentence_block(["a"], comments=["# newdoc id = d1"]),
        _sentence_block(["b"]),
        _sentence_block(["c"]),
        _sentence_block(["d"], comments=["# newdoc id = d2"]),
        _sentence_block(["e"]),
    ])
    tb = parse_conllu(text)
    assert [d.doc_id for d in tb.documents] == ["d1", "d2"]
    assert [len(d.sentences) for d in tb.documents] == [3, 2]
    assert [s.index_in_doc for s in tb.documents[0].sentences] == [0, 1, 2]


def test_no_newdoc_yields_single_document():
    text = "\n\n".join([_sentence_block(["a"]), _sentence_block(["b"])])
    tb = parse_conllu(text)
    assert len(tb.documents) == 1
    assert tb.documents[0].doc_id == "doc1"
    assert tb.n_sentences() == 2


def test_sentences_before_first_marker_get_their_own_document():
    text = "\n\n".join([
        _sentence_block(["a"]),
        _sentence_block(["b"], comments=["# newdoc id = named"]),
    ])
    tb = parse_conllu(text)
    assert [d.doc_id for d in tb.documents] == ["doc1", "named"]


def test_bare_newdoc_marker_gets_generated_id():
    text = _sentence_block(["a"], comments=["# newdoc"])
    tb = parse_conllu(text)
    assert tb.documents[0].doc_id == "doc1"


def test_text_comment_preferred_over_joined_forms():
    block = _sentence_block(["Don't", "panic"], comments=["# text = Don't panic!"])
    sent = parse_conllu(block).documents[0].sentences[0]
    assert sent.text == "Don't panic!"


def test_fallback_text_joins_forms():
    sent = parse_conllu(_sentence_block(["hello", "world"])).documents[0].sentences[0]
    assert sent.text == "hello world"


def test_multiword_token_shapes_fallback_text_but_not_tokens():
    text = "\n".join([
        _row("1-2", "won't", "_", upos="_", deprel="_"),
        _row(1, "will", 0, upos="AUX", deprel="root"),
        _row(2, "not", 1, upos="PART"),
        _row(3, "stop", 1, upos="VERB"),
    ])
    sent = parse_conllu(text).documents[0].sentences[0]
    assert sent.forms == ["will", "not", "stop"]
    assert sent.text == "won't stop"


def test_empty_nodes_are_dropped():
    text = "\n".join([
        _row(1, "one", 0, deprel="root"),
        "1.1\tghost\tghost\tNOUN\t_\t_\t_\t_\t_\t_",
        _row(2, "two", 1),
    ])
    sent = parse_conllu(text).documents[0].sentences[0]
    assert sent.forms == ["one", "two"]


def test_sent_id_comment_and_default_counter():
    text = "\n\n".join([
        _sentence_block(["a"], comments=["# sent_id = chosen"]),
        _sentence_block(["b"]),
    ])
    tb = parse_conllu(text)
    ids = [s.sent_id for s in tb.sentences()]
    assert ids == ["chosen", "s2"]


@pytest.mark.parametrize("bad_block, fragment", [
    ("1\tform\tform\tNOUN\t_\t_\t0", "columns"),
    (_row(1, "a", "x"), "head"),
    ("x\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_", "token id"),
    (_row(0, "a", 0), ">= 1"),
    (_row(1, "a", 0, deprel="root") + "\n" + _row(1, "b", 1), "duplicate"),
    (_row(1, "a", 0, deprel="root") + "\n" + _row(3, "b", 1), "consecutive"),
    (_row(1, "a", -1), "negative head"),
    (_row(1, "a", 1), "own head"),
    (_row(1, "", 0), "empty form"),
])
def test_malformed_rows_raise_with_line_number(bad_block, fragment):
    with pytest.raises(ConlluParseError) as excinfo:
        parse_conllu(bad_block)
    assert fragment in str(excinfo.value)
    assert "line" in str(excinfo.value)
    assert excinfo.value.line_no >= 1


def test_error_names_the_offending_line():
    text = "# comment line\n" + _row(1, "a", 0, deprel="root") + "\n" + _row(3, "b", 1)
    with pytest.raises(ConlluParseError) as excinfo:
        parse_conllu(text)
    assert excinfo.value.line_no == 3


def test_bad_multiword_range_raises():
    with pytest.raises(ConlluParseError):
        parse_conllu("1-x\tab\t_\t_\t_\t_\t_\t_\t_\t_\n" + _row(1, "a", 0, deprel="root"))


def test_root_id_unique_and_multi_root_flagged(caplog):
    unique = parse_conllu(_sentence_block(["a", "b"])).documents[0].sentences[0]
    assert unique.root_id == 1
    two_roots = "\n".join([_row(1, "a", 0, deprel="root"), _row(2, "b", 0, deprel="root")])
    with caplog.at_level("WARNING", logger="mlmeval.conllu"):
        sent = parse_conllu(two_roots).documents[0].sentences[0]
    assert sent.root_id is None
    assert sent.root_ids == (1, 2)
    assert any("root" in r.message for r in caplog.records)


def test_rootless_sentence_has_no_root_id():
    text = "\n".join([_row(1, "a", 2, deprel="dep"), _row(2, "b", 1, deprel="dep")])
    assert parse_conllu(text).documents[0].sentences[0].root_id is None


def test_parse_is_deterministic(treebank):
    text = fixture_conllu()
    assert parse_conllu(text) == parse_conllu(text)


def test_parse_file_round_trip(tmp_path):
    path = tmp_path / "tiny.conllu"
    path.write_text(_sentence_block(["x", "y"]) + "\n", encoding="utf-8")
    tb = parse_conllu_file(path)
    assert tb.n_sentences() == 1


def test_block_count_matches_sentence_count():
    text = fixture_conllu()
    blocks = [b for b in text.split("\n\n") if any(
        line and not line.startswith("#") for line in b.splitlines()
    )]
    assert parse_conllu(text).n_sentences() == len(blocks)


def test_filter_sentences_bounds():
    text = "\n\n".join(_sentence_block([f"w{i}" for i in range(n)]) for n in range(1, 11))
    tb = parse_conllu(text)
    kept = filter_sentences(tb, 5, 50)
    assert len(kept) == 6
    assert all(5 <= len(s) <= 50 for s in kept)
    assert [len(s) for s in kept] == sorted(len(s) for s in kept)


def test_filter_sentences_inclusive_boundaries():
    text = "\n\n".join([
        _sentence_block([f"a{i}" for i in range(4)]),
        _sentence_block([f"b{i}" for i in range(5)]),
    ])
    tb = parse_conllu(text)
    kept = filter_sentences(tb, 5, 5)
    assert [s.forms[0] for s in kept] == ["b0"]


@pytest.mark.parametrize("lo, hi", [(0, 5), (6, 5), (-1, 3)])
def test_filter_sentences_rejects_bad_bounds(treebank, lo, hi):
    with pytest.raises(ValueError):
        filter_sentences(treebank, lo, hi)


@given(
    n_docs=st.integers(min_value=1, max_value=4),
    per_doc=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_generated_treebanks_satisfy_invariants(n_docs, per_doc, seed):
    tb = parse_conllu(fixture_conllu(n_docs, per_doc, seed))
    assert len(tb.documents) == n_docs
    assert tb.n_sentences() == n_docs * per_doc
    for doc in tb.documents:
        for index, sent in enumerate(doc.sentences):
            assert sent.index_in_doc == index
            assert sent.text
            assert [t.id for t in sent.tokens] == list(range(1, len(sent) + 1))
            assert sum(t.head == 0 for t in sent.tokens) == 1
            for tok in sent.tokens:
                assert tok.head != tok.id
                assert tok.form
