"""Identification engine: tag candidate mentions with major entities or null.

A mention is scored against every entity in a working memory; the best
entity is assigned when its score is strictly above the threshold. The static
variant never touches the memory, so mentions are scored independently. The
hybrid variant updates the assigned entity with a running mean and averages
the scores against the updated and the initial representations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Span
from .derive import MeiDocument
from .features import DEFAULT_DIM, hash_vector
from .metrics import PredictionSet

# Buckets 0..MAX_BUCKET hold floor(log2(distance)); NONE_BUCKET marks an
# entity with no assigned mention yet.
MAX_BUCKET = 8
NONE_BUCKET = 9
N_BUCKETS = NONE_BUCKET + 1


class DimensionMismatch(ValueError):
    pass


class NonPositiveDistance(ValueError):
    pass


class MissingPhraseSpan(ValueError):
    pass


def bucket_distance(d: int) -> int:
    if d < 1:
        raise NonPositiveDistance(f"distance must be >= 1, got {d}")
    return min(MAX_BUCKET, int(d).bit_length() - 1)


@dataclass(frozen=True)
class Metadata:
    distance_bucket: int | None = None

    @property
    def is_none(self) -> bool:
        return self.distance_bucket is None

    @classmethod
    def from_positions(cls, mention_ordinal: int, last_assigned: int | None) -> "Metadata":
        if last_assigned is None:
            return cls(None)
        return cls(bucket_distance(mention_ordinal - last_assigned))

    def one_hot(self) -> np.ndarray:
        out = np.zeros(N_BUCKETS)
        out[NONE_BUCKET if self.distance_bucket is None else self.distance_bucket] = 1.0
        return out


NO_METADATA = Metadata(None)


@dataclass
class MemoryEntry:
    entity_id: int
    current: np.ndarray
    initial: np.ndarray
    assigned_count: int = 1
    last_assigned: int | None = None

    @classmethod
    def from_vector(cls, entity_id: int, vector) -> "MemoryEntry":
        v = np.asarray(vector, dtype=float)
        return cls(entity_id, v.copy(), v.copy())

    def copy(self) -> "MemoryEntry":
        return MemoryEntry(self.entity_id, self.current.copy(), self.initial.copy(),
                           self.assigned_count, self.last_assigned)


def running_mean(entity: np.ndarray, mention: np.ndarray, count: int) -> np.ndarray:
    """Weighted mean update: ``(count * entity + mention) / (count + 1)``."""
    return (count * entity + mention) / (count + 1)


# ---------------------------------------------------------------------------
# scorers

class Scorer:
    """Scores a mention against one entity representation.

    ``slot_score`` is what the engine calls; it picks the memory slot
    ("initial" or "current") and delegates to ``score``. Scorers that need to
    see a different slot override it.
    """

    def score(self, mention: np.ndarray, entity: np.ndarray, metadata: Metadata) -> float:
        raise NotImplementedError

    def slot_score(self, mention: np.ndarray, entry: MemoryEntry, slot: str, metadata: Metadata) -> float:
        return self.score(mention, getattr(entry, slot), metadata)


class DotScorer(Scorer):
    def score(self, mention, entity, metadata):
        return float(np.dot(mention, entity))


class CosineScorer(Scorer):
    def score(self, mention, entity, metadata):
        na, nb = np.linalg.norm(mention), np.linalg.norm(entity)
        return float(np.dot(mention, entity) / (na * nb)) if na and nb else 0.0


class InitialOnlyScorer(Scorer):
    """Wraps a scorer so that it sees nothing the memory updates.

    Both hybrid slots get the initial representation, and the distance
    metadata (which tracks past assignments) is replaced by NONE.
    """

    def __init__(self, base: Scorer):
        self.base = base

    def score(self, mention, entity, metadata):
        return self.base.score(mention, entity, NO_METADATA)

    def slot_score(self, mention, entry, slot, metadata):
        return self.base.score(mention, entry.initial, NO_METADATA)


class MlpScorer(Scorer):
    """One-hidden-layer MLP over ``[m, e, m*e, one_hot(distance bucket)]``.

    Weights come from an ``.npz`` with arrays ``w1 (H, 3D+10)``, ``b1 (H,)``,
    ``w2 (H,)``, ``b2 ()``. The package does not train them.
    """

    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.asarray(w1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.w2 = np.asarray(w2, dtype=float)
        self.b2 = float(np.asarray(b2))
        if (self.w1.shape[1] - N_BUCKETS) % 3:
            raise DimensionMismatch(f"w1 has {self.w1.shape[1]} inputs; expected 3*dim + {N_BUCKETS}")
        self.dim = (self.w1.shape[1] - N_BUCKETS) // 3

    @classmethod
    def load(cls, path: str | Path) -> "MlpScorer":
        with np.load(path) as z:
            return cls(z["w1"], z["b1"], z["w2"], z["b2"])

    @classmethod
    def random(cls, dim: int, hidden: int = 32, seed: int = 0) -> "MlpScorer":
        rng = np.random.default_rng(seed)
        fan_in = 3 * dim + N_BUCKETS
        return cls(rng.normal(0, fan_in ** -0.5, (hidden, fan_in)), np.zeros(hidden),
                   rng.normal(0, hidden ** -0.5, hidden), 0.0)

    def save(self, path: str | Path) -> None:
        np.savez(path, w1=self.w1, b1=self.b1, w2=self.w2, b2=np.asarray(self.b2))

    def score(self, mention, entity, metadata):
        if len(mention) != self.dim or len(entity) != self.dim:
            raise DimensionMismatch(f"MLP expects dimension {self.dim}")
        x = np.concatenate([mention, entity, mention * entity, metadata.one_hot()])
        h = np.maximum(0.0, self.w1 @ x + self.b1)
        return float(self.w2 @ h + self.b2)


SCORERS = {"dot": DotScorer, "cosine": CosineScorer}


# ---------------------------------------------------------------------------
# identification

MentionInput = Sequence[tuple[Span, np.ndarray]]


def _check_dims(mentions: MentionInput, entities: Sequence[MemoryEntry]) -> None:
    if not entities:
        return
    dim = len(entities[0].initial)
    for e in entities:
        if len(e.initial) != dim or len(e.current) != dim:
            raise DimensionMismatch(f"entity {e.entity_id} has dimension {len(e.initial)}, expected {dim}")
    for span, vec in mentions:
        if len(vec) != dim:
            raise DimensionMismatch(f"mention {tuple(span)} has dimension {len(vec)}, expected {dim}")


def _best(scores: list[tuple[float, int]], threshold: float) -> int | None:
    # strict max: first (lowest entity_id) wins ties
    best_score, best_id = None, None
    for score, eid in scores:
        if best_score is None or score > best_score:
            best_score, best_id = score, eid
    if best_score is None or not best_score > threshold:
        return None
    return best_id


def identify_static(mentions: MentionInput, entities: Sequence[MemoryEntry],
                    scorer: Scorer, threshold: float = 0.0) -> list[tuple[Span, int | None]]:
    """Label every mention independently against the fixed initial memory.

    Output is sorted by span, so any permutation of ``mentions`` gives the
    same result.
    """
    _check_dims(mentions, entities)
    ordered = sorted(entities, key=lambda e: e.entity_id)
    out = []
    for span, vec in mentions:
        scores = [(scorer.slot_score(vec, e, "initial", NO_METADATA), e.entity_id) for e in ordered]
        out.append((Span(*span), _best(scores, threshold)))
    return sorted(out, key=lambda a: a[0])


def identify_hybrid(mentions: MentionInput, entities: Sequence[MemoryEntry],
                    scorer: Scorer, threshold: float = 0.0,
                    trace: list | None = None) -> list[tuple[Span, int | None]]:
    """Label mentions left to right, updating the memory of assigned entities.

    ``entities`` are copied; the caller's memory is left untouched. When
    ``trace`` is a list, the post-update memory state is appended after each
    mention.
    """
    _check_dims(mentions, entities)
    memory = [e.copy() for e in sorted(entities, key=lambda e: e.entity_id)]
    out = []
    for ordinal, (span, vec) in enumerate(mentions):
        vec = np.asarray(vec, dtype=float)
        scores = []
        for e in memory:
            meta = Metadata.from_positions(ordinal, e.last_assigned)
            cur = scorer.slot_score(vec, e, "current", meta)
            init = scorer.slot_score(vec, e, "initial", meta)
            scores.append(((cur + init) / 2.0, e.entity_id))
        label = _best(scores, threshold)
        if label is not None:
            e = next(m for m in memory if m.entity_id == label)
            e.current = running_mean(e.current, vec, e.assigned_count)
            e.assigned_count += 1
            e.last_assigned = ordinal
        out.append((Span(*span), label))
        if trace is not None:
            trace.append([m.copy() for m in memory])
    return sorted(out, key=lambda a: a[0])


# ---------------------------------------------------------------------------
# encoders

class SpanEncoder(Protocol):
    def encode_spans(self, doc: MeiDocument, spans: Sequence[Span]) -> list[np.ndarray]: ...

    def encode_entities(self, doc: MeiDocument) -> dict[int, np.ndarray]: ...


class HashSpanEncoder:
    """Hashed bag of words over span tokens; entities use their phrase span."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def encode_spans(self, doc, spans):
        return [hash_vector(doc.tokens[s.start : s.end + 1], self.dim) for s in spans]

    def encode_entities(self, doc):
        out = {}
        for e in doc.entities:
            if e.phrase_span is not None:
                words = doc.tokens[e.phrase_span.start : e.phrase_span.end + 1]
            else:
                words = e.phrase.split()
            out[e.entity_id] = hash_vector(words, self.dim)
        return out


class FileSpanEncoder:
    """Precomputed vectors, one jsonlines record per document.

    Record: ``{"doc_id", "spans": [[s, e]], "vectors": [[...]],
    "entities": [{"id", "vector"}]}``. ``entities`` is optional; without it,
    entity vectors are looked up at each entity's phrase span.
    """

    def __init__(self, records: dict[str, dict]):
        self.records = records

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "FileSpanEncoder":
        records: dict[str, dict] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                rec = records.setdefault(obj["doc_id"], {"spans": {}, "entities": {}})
                for span, vec in zip(obj.get("spans", []), obj.get("vectors", [])):
                    rec["spans"][Span(*span)] = np.asarray(vec, dtype=float)
                for ent in obj.get("entities", []):
                    rec["entities"][int(ent["id"])] = np.asarray(ent["vector"], dtype=float)
        return cls(records)

    def _record(self, doc):
        try:
            return self.records[doc.doc_id]
        except KeyError:
            raise KeyError(f"no precomputed vectors for document {doc.doc_id!r}") from None

    def encode_spans(self, doc, spans):
        rec = self._record(doc)
        missing = [tuple(s) for s in spans if s not in rec["spans"]]
        if missing:
            raise KeyError(f"{doc.doc_id}: no vectors for spans {missing[:5]}")
        return [rec["spans"][s] for s in spans]

    def encode_entities(self, doc):
        rec = self._record(doc)
        out = {}
        for e in doc.entities:
            if e.entity_id in rec["entities"]:
                out[e.entity_id] = rec["entities"][e.entity_id]
            elif e.phrase_span is not None and e.phrase_span in rec["spans"]:
                out[e.entity_id] = rec["spans"][e.phrase_span]
            else:
                raise MissingPhraseSpan(f"{doc.doc_id}: entity {e.entity_id} has no encodable phrase occurrence")
        return out


def run_engine(doc: MeiDocument, candidate_mentions: Sequence[Span], encoder: SpanEncoder,
               mode: str = "hybrid", scorer: Scorer | None = None,
               threshold: float = 0.0) -> PredictionSet:
    if mode not in ("static", "hybrid"):
        raise ValueError(f"unknown engine mode {mode!r}")
    spans = sorted(set(Span(*s) for s in candidate_mentions))
    if not spans:
        return PredictionSet(doc.doc_id)
    entity_vecs = encoder.encode_entities(doc)
    memory = [MemoryEntry.from_vector(eid, entity_vecs[eid]) for eid in doc.entity_ids]
    mentions = list(zip(spans, encoder.encode_spans(doc, spans)))
    scorer = scorer or DotScorer()
    identify = identify_static if mode == "static" else identify_hybrid
    return PredictionSet(doc.doc_id, tuple(identify(mentions, memory, scorer, threshold)))
