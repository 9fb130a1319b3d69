import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mei.corpus import (
    AnnotatedDocument,
    Cluster,
    MalformedLine,
    SchemaViolation,
    Span,
    UnbalancedCoref,
    document_from_json,
    parse_conll,
    read_jsonl,
    write_jsonl,
)


def conll(coref, words=None, name="doc", sentence_breaks=()):
    words = words or [f"t{i}" for i in range(len(coref))]
    lines = [f"#begin document ({name}); part 000"]
    for i, (w, c) in enumerate(zip(words, coref)):
        if i in sentence_breaks:
            lines.append("")
        lines.append(f"{name}\t0\t{i}\t{w}\tNN\t*\t-\t-\t-\tspk\t*\t{c}")
    lines += ["", "#end document"]
    return "\n".join(lines) + "\n"


def test_minimal_balanced_markers():
    (doc,) = parse_conll(conll(["(1", "1)", "-"]))
    assert doc.clusters == (Cluster(1, (Span(0, 1),)),)


def test_nested_open_stack():
    (doc,) = parse_conll(conll(["(1(2", "2)", "1)"]))
    by_id = {c.cluster_id: c.mentions for c in doc.clusters}
    assert by_id == {1: (Span(0, 2),), 2: (Span(0, 1),)}


def test_singleton_markers():
    (doc,) = parse_conll(conll(["(1)", "-", "(1)"]))
    assert doc.clusters == (Cluster(1, (Span(0, 0), Span(2, 2))),)


def test_same_id_nested_closes_innermost():
    (doc,) = parse_conll(conll(["(1(1", "1)", "1)"]))
    assert doc.clusters[0].mentions == (Span(0, 1), Span(0, 2))


def test_multi_id_column():
    (doc,) = parse_conll(conll(["(3|(4)", "-", "3)"]))
    by_id = {c.cluster_id: c.mentions for c in doc.clusters}
    assert by_id == {3: (Span(0, 2),), 4: (Span(0, 0),)}


def test_words_and_sentences():
    (doc,) = parse_conll(conll(["-"] * 4, words=["A", "b", ".", "C"], sentence_breaks=(3,)))
    assert doc.tokens == ("A", "b", ".", "C")
    assert doc.sentences == ((0, 3), (3, 4))
    doc.validate()


def test_unclosed_reports_opening_line():
    with pytest.raises(UnbalancedCoref) as err:
        parse_conll(conll(["-", "(1", "-"]))
    assert err.value.line_number == 3


def test_over_closed_reports_line():
    with pytest.raises(UnbalancedCoref) as err:
        parse_conll(conll(["-", "1)"]))
    assert err.value.line_number == 3


def test_wrong_column_count():
    text = conll(["-", "-"]).replace("t1\tNN\t*", "t1\tNN", 1)
    with pytest.raises(MalformedLine) as err:
        parse_conll(text)
    assert err.value.line_number == 3


def test_too_few_columns():
    with pytest.raises(MalformedLine):
        parse_conll("#begin document (d); part 000\nd 0 0\n#end document\n")


def test_parts_are_concatenated():
    text = conll(["(1)", "-"]) + conll(["-", "(1)"]).replace("part 000", "part 001")
    (doc,) = parse_conll(text)
    assert len(doc) == 4
    assert doc.clusters[0].mentions == (Span(0, 0), Span(3, 3))
    doc.validate()


def test_several_documents():
    docs = parse_conll(conll(["(1)"], name="a") + conll(["(2)"], name="b"))
    assert [d.doc_id for d in docs] == ["a", "b"]


def test_span_in_two_clusters_kept_once():
    (doc,) = parse_conll(conll(["(1)|(2)", "(2)"]))
    doc.validate()
    assert sum(len(c.mentions) for c in doc.clusters) == 2


# -- jsonlines ---------------------------------------------------------------

def test_empty_file_reads_empty(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_text("")
    assert read_jsonl(p) == []


def test_missing_tokens_is_schema_violation(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps({"doc_id": "x", "sentences": [], "clusters": []}) + "\n")
    with pytest.raises(SchemaViolation) as err:
        read_jsonl(p)
    assert err.value.doc_id == "x"
    assert err.value.path == "tokens"


def test_bad_span_path_reported():
    obj = {"doc_id": "x", "tokens": ["a"], "sentences": [[0, 1]], "clusters": [[[0, 0], [0]]]}
    with pytest.raises(SchemaViolation) as err:
        document_from_json(obj)
    assert err.value.path == "clusters[0][1]"


def test_out_of_range_span_rejected():
    obj = {"doc_id": "x", "tokens": ["a"], "sentences": [[0, 1]], "clusters": [[[0, 3]]]}
    with pytest.raises(SchemaViolation):
        document_from_json(obj)


def test_conll_round_trip(tmp_path):
    docs = parse_conll(conll(["(7(2", "2)", "7)", "(2)"]))
    p = tmp_path / "rt.jsonl"
    write_jsonl(docs, p)
    assert read_jsonl(p) == docs


@st.composite
def documents(draw):
    n = draw(st.integers(1, 15))
    tokens = draw(st.lists(st.text(min_size=1, max_size=5), min_size=n, max_size=n))
    cuts = sorted(set(draw(st.lists(st.integers(1, n - 1), max_size=3)) if n > 1 else []))
    bounds = [0] + cuts + [n]
    sentences = tuple(zip(bounds, bounds[1:]))
    spans = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, 2)), unique_by=lambda t: t, max_size=8))
    spans = list(dict.fromkeys(Span(s, min(n - 1, s + w)) for s, w in spans))
    n_clusters = draw(st.integers(0, len(spans)))
    clusters = []
    for ci in range(n_clusters):
        members = spans[ci::n_clusters] if n_clusters else []
        clusters.append(Cluster(draw(st.integers(0, 50)), tuple(members)))
    return AnnotatedDocument(draw(st.text(min_size=1, max_size=6)), tuple(tokens), sentences, tuple(clusters))


@settings(max_examples=60, deadline=None)
@given(st.lists(documents(), max_size=4))
def test_jsonl_round_trip_property(tmp_path_factory, docs):
    p = tmp_path_factory.mktemp("rt") / "docs.jsonl"
    write_jsonl(docs, p)
    assert read_jsonl(p) == docs


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["-", "(1", "1)", "(1)", "(2", "2)", "(2)", "(1(2", "2)1)"]), min_size=1, max_size=12))
def test_parsed_spans_in_range_and_sorted(coref):
    try:
        docs = parse_conll(conll(coref))
    except UnbalancedCoref:
        return
    for doc in docs:
        for c in doc.clusters:
            assert list(c.mentions) == sorted(set(c.mentions))
            for m in c.mentions:
                assert 0 <= m.start <= m.end < len(doc)
