import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mei_doc
from mei.analysis import (
    CATEGORIES,
    ErrorCounts,
    UnknownEntityLabel,
    classify_errors,
    errors_to_json,
    errors_to_tsv,
    varying_k_report,
)
from mei.corpus import AnnotatedDocument, Cluster, Span
from mei.derive import MajorEntity, MeiDocument
from mei.metrics import PredictionSet, gold_as_prediction

A, B, C, D = Span(0, 0), Span(2, 2), Span(4, 4), Span(6, 6)


def four_error_fixture():
    ents = (MajorEntity(1, "one", None, 1), MajorEntity(2, "two", None, 1))
    gold = MeiDocument("f", tuple(f"w{i}" for i in range(8)), ((0, 8),), ents, ((A, 1), (B, 2)), (C,))
    pred = PredictionSet("f", ((A, 2), (C, 1), (D, 1)))
    return gold, pred


def test_four_discrepancies():
    gold, pred = four_error_fixture()
    counts = classify_errors(gold, pred)
    assert counts.as_dict() == {"missing_major": 1, "major_major": 1, "major_other": 0,
                                "other_major": 1, "extra_major": 1}
    witnessed = {(r.category, r.span, r.gold_label, r.pred_label) for r in counts.records}
    assert witnessed == {("major_major", A, 1, 2), ("missing_major", B, 2, None),
                         ("other_major", C, None, 1), ("extra_major", D, None, 1)}


def test_gold_as_prediction_is_clean():
    gold, _ = four_error_fixture()
    assert classify_errors(gold, gold_as_prediction(gold)).as_tuple() == (0, 0, 0, 0, 0)


def test_null_prediction_of_major_is_major_other():
    gold, _ = four_error_fixture()
    counts = classify_errors(gold, PredictionSet("f", ((A, None), (B, 2), (C, None), (D, None))))
    assert counts.as_dict()["major_other"] == 1
    assert counts.total() == 1


def test_unknown_label():
    gold, _ = four_error_fixture()
    with pytest.raises(UnknownEntityLabel):
        classify_errors(gold, PredictionSet("f", ((A, 5),)))


def _random_pred(rng, doc, allow_null):
    universe = sorted({s for s, _ in doc.gold} | set(doc.other_mentions) | {Span(38, 38), Span(39, 39)})
    labels = doc.entity_ids + ([None] if allow_null else [])
    return PredictionSet(doc.doc_id, tuple((s, rng.choice(labels))
                                           for s in rng.sample(universe, rng.randint(0, len(universe)))))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9), st.booleans())
def test_counts_witnessed_once(seed, allow_null):
    rng = random.Random(seed)
    doc = random_mei_doc(rng, rng.randint(1, 4), rng.randint(4, 12))
    pred = _random_pred(rng, doc, allow_null)
    counts = classify_errors(doc, pred)
    assert all(v >= 0 for v in counts.as_tuple())
    assert counts.total() == len(counts.records)
    assert len({r.span for r in counts.records}) == len(counts.records)
    for cat in CATEGORIES:
        assert getattr(counts, cat) == sum(1 for r in counts.records if r.category == cat)
    if not allow_null:
        assert counts.major_other == 0
    gold_spans = {s for s, _ in doc.gold}
    restricted = PredictionSet(doc.doc_id, tuple(a for a in pred.assignments if a[0] in gold_spans))
    r = classify_errors(doc, restricted)
    assert r.extra_major == 0 and r.other_major == 0


def test_error_reports():
    gold, pred = four_error_fixture()
    per_doc = [("f", classify_errors(gold, pred))]
    tsv = errors_to_tsv(per_doc).splitlines()
    assert tsv[0] == "doc_id\tmissing_major\tmajor_major\tmajor_other\tother_major\textra_major"
    assert tsv[1] == "f\t1\t1\t0\t1\t1"
    assert tsv[2] == "total\t1\t1\t0\t1\t1"
    js = errors_to_json(per_doc)
    assert js["total"]["extra_major"] == 1
    assert len(js["documents"][0]["errors"]) == 4


def test_counts_add():
    gold, pred = four_error_fixture()
    total = ErrorCounts()
    total += classify_errors(gold, pred)
    total += classify_errors(gold, pred)
    assert total.as_tuple() == (2, 2, 0, 2, 2)


def annotated(counts):
    clusters, pos = [], 0
    for i, c in enumerate(counts):
        clusters.append(Cluster(i, tuple(Span(pos + j, pos + j) for j in range(c))))
        pos += c
    return AnnotatedDocument("v", tuple(f"w{i}" for i in range(pos)), ((0, pos),), tuple(clusters))


def test_varying_k_oracle_is_all_ones():
    report = varying_k_report(annotated([9, 8, 7, 6]), gold_as_prediction, k_max=3)
    assert report.shape == (3, 4)
    for rank, row in enumerate(report.cells, start=1):
        for k, v in enumerate(row):
            assert v == (None if k and rank > k else 1.0)


def test_varying_k_single_column():
    report = varying_k_report(annotated([9, 8]), gold_as_prediction, k_max=1)
    assert report.shape == (1, 2)
    assert report.to_tsv().splitlines()[0] == "rank\tphrase\tsole\tk=1"


def test_varying_k_uses_renumbered_targets():
    seen = []

    def predictor(doc):
        seen.append(len(doc.entities))
        # always predict entity 1 for every gold span
        return PredictionSet(doc.doc_id, tuple((s, 1) for s, _ in doc.gold))

    report = varying_k_report(annotated([6, 5]), predictor, k_max=2)
    assert seen == [1, 1, 1, 2]
    # with two targets entity 2 is never predicted
    assert report.cells[1][2] == 0.0
    assert report.cells[1][0] == 1.0
    assert report.to_json()["cells"][1] == [1.0, None, 0.0]
