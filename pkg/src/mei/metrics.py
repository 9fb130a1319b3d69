"""Per-entity precision/recall/F1 and corpus Macro-F1 / Micro-F1."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import SchemaViolation, Span, _require, iter_jsonl, write_jsonl_records
from .derive import MeiDocument


class UnknownEntity(KeyError):
    pass


class EmptyCorpus(ValueError):
    pass


class DuplicateSpan(ValueError):
    pass


@dataclass(frozen=True)
class PredictionSet:
    """A system's labels for one document; ``None`` marks the null entity."""

    doc_id: str
    assignments: tuple[tuple[Span, int | None], ...] = ()

    def __post_init__(self):
        items = tuple(sorted(((Span(*s), label) for s, label in self.assignments),
                             key=lambda a: a[0]))
        for a, b in zip(items, items[1:]):
            if a[0] == b[0]:
                raise DuplicateSpan(f"{self.doc_id}: span {tuple(a[0])} predicted twice")
        object.__setattr__(self, "assignments", items)

    def as_dict(self) -> dict[Span, int | None]:
        return dict(self.assignments)

    def spans_for(self, entity_id: int) -> set[Span]:
        return {s for s, label in self.assignments if label == entity_id}

    def __len__(self) -> int:
        return len(self.assignments)


@dataclass(frozen=True)
class EntityScore:
    entity_id: int
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def gold_as_prediction(doc: MeiDocument) -> PredictionSet:
    return PredictionSet(doc.doc_id, doc.gold)


def entity_prf(gold: MeiDocument, pred: PredictionSet, entity_id: int) -> EntityScore:
    if entity_id not in gold.entity_ids:
        raise UnknownEntity(entity_id)
    if pred.doc_id != gold.doc_id:
        raise ValueError(f"prediction for {pred.doc_id!r} scored against {gold.doc_id!r}")
    gold_spans = set(gold.gold_mentions(entity_id))
    pred_spans = pred.spans_for(entity_id)
    tp = len(gold_spans & pred_spans)
    return EntityScore(entity_id, tp, len(pred_spans) - tp, len(gold_spans) - tp)


def document_scores(gold: MeiDocument, pred: PredictionSet) -> list[EntityScore]:
    return [entity_prf(gold, pred, eid) for eid in gold.entity_ids]


def _check_pairs(corpus) -> list[tuple[MeiDocument, PredictionSet]]:
    pairs = list(corpus)
    if not pairs:
        raise EmptyCorpus("no documents to score")
    return pairs


def macro_f1(corpus: Iterable[tuple[MeiDocument, PredictionSet]]) -> float:
    total, count = 0.0, 0
    for gold, pred in _check_pairs(corpus):
        if not gold.entities:
            raise ValueError(f"{gold.doc_id}: document has no major entities")
        scores = document_scores(gold, pred)
        total += sum(s.f1 for s in scores)
        count += len(scores)
    return total / count


def document_weighted_f1(gold: MeiDocument, pred: PredictionSet) -> float:
    counts = gold.gold_counts()
    denom = sum(counts.values())
    if denom == 0:
        raise ValueError(f"{gold.doc_id}: document has no gold mentions")
    return sum(s.f1 * counts[s.entity_id] for s in document_scores(gold, pred)) / denom


def micro_f1(corpus: Iterable[tuple[MeiDocument, PredictionSet]]) -> float:
    pairs = _check_pairs(corpus)
    return sum(document_weighted_f1(g, p) for g, p in pairs) / len(pairs)


def pair_corpus(golds: Sequence[MeiDocument], preds: Sequence[PredictionSet]
                ) -> list[tuple[MeiDocument, PredictionSet]]:
    """Match predictions to gold documents by doc_id.

    Gold documents without predictions are scored against an empty set.
    Predictions for unknown documents raise ``ValueError`` naming them.
    """
    by_id = {p.doc_id: p for p in preds}
    known = {g.doc_id for g in golds}
    stray = sorted(set(by_id) - known)
    if stray:
        raise ValueError("predictions for unknown documents: " + ", ".join(stray))
    return [(g, by_id.get(g.doc_id, PredictionSet(g.doc_id))) for g in golds]


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class Report:
    rows: tuple[tuple[str, int, str, EntityScore], ...]
    macro: float
    micro: float

    def to_tsv(self) -> str:
        lines = ["doc_id\tentity_id\tphrase\ttp\tfp\tfn\tprecision\trecall\tf1"]
        for doc_id, eid, phrase, s in self.rows:
            lines.append(f"{doc_id}\t{eid}\t{phrase}\t{s.tp}\t{s.fp}\t{s.fn}\t"
                         f"{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}")
        lines.append(f"macro_f1\t{self.macro:.4f}")
        lines.append(f"micro_f1\t{self.micro:.4f}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "entities": [
                {"doc_id": d, "entity_id": e, "phrase": p, "tp": s.tp, "fp": s.fp, "fn": s.fn,
                 "precision": round(s.precision, 4), "recall": round(s.recall, 4), "f1": round(s.f1, 4)}
                for d, e, p, s in self.rows
            ],
            "macro_f1": round(self.macro, 4),
            "micro_f1": round(self.micro, 4),
        }


def evaluate(corpus: Iterable[tuple[MeiDocument, PredictionSet]]) -> Report:
    pairs = _check_pairs(corpus)
    rows = []
    for gold, pred in pairs:
        for score in document_scores(gold, pred):
            rows.append((gold.doc_id, score.entity_id, gold.entity(score.entity_id).phrase, score))
    return Report(tuple(rows), macro_f1(pairs), micro_f1(pairs))


# ---------------------------------------------------------------------------
# prediction jsonlines

def prediction_to_json(pred: PredictionSet) -> dict:
    return {"doc_id": pred.doc_id,
            "assignments": [[s.start, s.end, label] for s, label in pred.assignments]}


def prediction_from_json(obj: dict) -> PredictionSet:
    if not isinstance(obj, dict):
        raise SchemaViolation("expected a JSON object")
    doc_id = _require(obj, "doc_id", str, None)
    out = []
    for i, a in enumerate(_require(obj, "assignments", list, doc_id)):
        ok = (isinstance(a, list) and len(a) == 3
              and all(isinstance(v, int) and not isinstance(v, bool) for v in a[:2])
              and (a[2] is None or (isinstance(a[2], int) and not isinstance(a[2], bool))))
        if not ok or a[0] > a[1] or a[0] < 0:
            raise SchemaViolation("expected [start, end, entity_id|null]", doc_id, f"assignments[{i}]")
        out.append((Span(a[0], a[1]), a[2]))
    try:
        return PredictionSet(doc_id, tuple(out))
    except DuplicateSpan as exc:
        raise SchemaViolation(str(exc), doc_id, "assignments") from exc


def read_predictions(path: str | Path) -> list[PredictionSet]:
    return [prediction_from_json(obj) for _, obj in iter_jsonl(path)]


def write_predictions(preds: Iterable[PredictionSet], path: str | Path) -> None:
    write_jsonl_records((prediction_to_json(p) for p in preds), path)


def check_labels(gold: MeiDocument, pred: PredictionSet) -> None:
    known = set(gold.entity_ids)
    for span, label in pred.assignments:
        if label is not None and label not in known:
            raise UnknownEntity(f"{pred.doc_id}: span {tuple(span)} labeled with unknown entity {label}")
