"""Error breakdown and per-entity reports across the number of target entities."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .corpus import AnnotatedDocument, Span
from .derive import DEFAULT_MIN_COUNT, MeiDocument, restrict_entities, select_major_entities
from .metrics import PredictionSet, entity_prf

CATEGORIES = ("missing_major", "major_major", "major_other", "other_major", "extra_major")


class UnknownEntityLabel(ValueError):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    category: str
    span: Span
    gold_label: int | None
    pred_label: int | None


@dataclass
class ErrorCounts:
    missing_major: int = 0
    major_major: int = 0
    major_other: int = 0
    other_major: int = 0
    extra_major: int = 0
    records: list[ErrorRecord] = field(default_factory=list, compare=False, repr=False)

    def add(self, record: ErrorRecord) -> None:
        setattr(self, record.category, getattr(self, record.category) + 1)
        self.records.append(record)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in CATEGORIES)

    def total(self) -> int:
        return sum(self.as_tuple())

    def as_dict(self) -> dict[str, int]:
        return dict(zip(CATEGORIES, self.as_tuple()))

    def __iadd__(self, other: "ErrorCounts") -> "ErrorCounts":
        for rec in other.records:
            self.add(rec)
        return self


def classify_errors(gold: MeiDocument, pred: PredictionSet) -> ErrorCounts:
    """Sort every discrepancy between ``pred`` and ``gold`` into one category.

    A NULL prediction counts as a discard; a span absent from ``pred`` is
    a miss. Spans outside gold and other mentions only count when labeled
    with a major entity.
    """
    known = set(gold.entity_ids)
    predicted = pred.as_dict()
    for span, label in predicted.items():
        if label is not None and label not in known:
            raise UnknownEntityLabel(f"{pred.doc_id}: span {tuple(span)} labeled {label}")

    counts = ErrorCounts()
    gold_map = dict(gold.gold)
    others = set(gold.other_mentions)
    assert not (others & gold_map.keys()), "gold and other mentions overlap"

    for span, g in gold.gold:
        if span not in predicted:
            counts.add(ErrorRecord("missing_major", span, g, None))
        elif predicted[span] is None:
            counts.add(ErrorRecord("major_other", span, g, None))
        elif predicted[span] != g:
            counts.add(ErrorRecord("major_major", span, g, predicted[span]))
    for span, label in pred.assignments:
        if label is None or span in gold_map:
            continue
        category = "other_major" if span in others else "extra_major"
        counts.add(ErrorRecord(category, span, None, label))
    return counts


def errors_to_tsv(per_doc: list[tuple[str, ErrorCounts]]) -> str:
    lines = ["doc_id\t" + "\t".join(CATEGORIES)]
    total = ErrorCounts()
    for doc_id, counts in per_doc:
        lines.append(doc_id + "\t" + "\t".join(str(v) for v in counts.as_tuple()))
        total += counts
    lines.append("total\t" + "\t".join(str(v) for v in total.as_tuple()))
    return "\n".join(lines) + "\n"


def errors_to_json(per_doc: list[tuple[str, ErrorCounts]]) -> dict:
    docs = []
    total = ErrorCounts()
    for doc_id, counts in per_doc:
        docs.append({
            "doc_id": doc_id, **counts.as_dict(),
            "errors": [{"category": r.category, "span": list(r.span),
                        "gold": r.gold_label, "pred": r.pred_label} for r in counts.records],
        })
        total += counts
    return {"documents": docs, "total": total.as_dict()}


# ---------------------------------------------------------------------------
# varying number of targets

Predictor = Callable[[MeiDocument], PredictionSet]


@dataclass(frozen=True)
class VaryingKReport:
    """Rows are entities by rank; column 0 is the entity as the sole target,
    column k holds its F1 with the top-k entities as targets (None when
    the entity's rank exceeds k)."""

    doc_id: str
    phrases: tuple[str, ...]
    k_max: int
    cells: tuple[tuple[float | None, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), self.k_max + 1

    def to_tsv(self) -> str:
        header = ["rank", "phrase", "sole"] + [f"k={k}" for k in range(1, self.k_max + 1)]
        lines = ["\t".join(header)]
        for rank, (phrase, row) in enumerate(zip(self.phrases, self.cells), start=1):
            vals = ["" if v is None else f"{v:.4f}" for v in row]
            lines.append("\t".join([str(rank), phrase] + vals))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "k_max": self.k_max, "phrases": list(self.phrases),
                "cells": [[None if v is None else round(v, 4) for v in row] for row in self.cells]}


def varying_k_report(doc: AnnotatedDocument, predictor: Predictor, k_max: int,
                     min_count: int = DEFAULT_MIN_COUNT) -> VaryingKReport:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    full = select_major_entities(doc, k=k_max, min_count=min_count)
    n = len(full.entities)
    cells = [[None] * (k_max + 1) for _ in range(n)]
    for rank in range(1, n + 1):
        sole = restrict_entities(full, [rank])
        cells[rank - 1][0] = entity_prf(sole, predictor(sole), 1).f1
    for k in range(1, k_max + 1):
        sub = restrict_entities(full, range(1, min(k, n) + 1))
        pred = predictor(sub)
        for rank in range(1, min(k, n) + 1):
            cells[rank - 1][k] = entity_prf(sub, pred, rank).f1
    return VaryingKReport(doc.doc_id, tuple(e.phrase for e in full.entities), k_max,
                          tuple(tuple(r) for r in cells))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
