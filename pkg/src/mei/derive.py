"""Derive major-entity documents from coreference annotations."""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (
    AnnotatedDocument,
    Cluster,
    SchemaViolation,
    Span,
    _require,
    _span_from,
    iter_jsonl,
    write_jsonl_records,
)

DEFAULT_K = 5
DEFAULT_MIN_COUNT = 5
LONG_NARRATIVE_K = 9

# Personal, possessive, reflexive, demonstrative, relative and indefinite
# pronouns. A mention whose full lowercased text is in this set is not a
# candidate designative phrase.
PRONOUNS = frozenset("""
i me my mine myself we us our ours ourselves
you your yours yourself yourselves thou thee thy thine thyself ye
he him his himself she her hers herself it its itself
they them their theirs themselves one oneself
this that these those who whom whose which what
someone somebody anyone anybody everyone everybody no-one nobody
""".split())


class NoQualifyingEntities(ValueError):
    pass


@dataclass(frozen=True)
class MajorEntity:
    entity_id: int
    phrase: str
    phrase_span: Span | None
    mention_count: int


@dataclass(frozen=True)
class MeiDocument:
    doc_id: str
    tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]
    entities: tuple[MajorEntity, ...]
    gold: tuple[tuple[Span, int], ...]
    other_mentions: tuple[Span, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "sentences", tuple(tuple(s) for s in self.sentences))
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "gold", tuple(sorted((Span(*s), e) for s, e in self.gold)))
        object.__setattr__(self, "other_mentions", tuple(sorted(Span(*s) for s in self.other_mentions)))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def entity_ids(self) -> list[int]:
        return [e.entity_id for e in self.entities]

    def entity(self, entity_id: int) -> MajorEntity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise KeyError(entity_id)

    def span_text(self, span: Span) -> str:
        return " ".join(self.tokens[span.start : span.end + 1])

    def gold_mentions(self, entity_id: int) -> list[Span]:
        return [s for s, e in self.gold if e == entity_id]

    def gold_counts(self) -> Counter:
        return Counter(e for _, e in self.gold)

    def validate(self) -> None:
        n = len(self.tokens)
        ids = self.entity_ids
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise SchemaViolation("entity ids must be 1..L without gaps", self.doc_id, "entities")
        for e in self.entities:
            if not e.phrase:
                raise SchemaViolation("empty designative phrase", self.doc_id, f"entities[{e.entity_id}]")
        known = set(ids)
        seen: set[Span] = set()
        for i, (span, eid) in enumerate(self.gold):
            if eid not in known:
                raise SchemaViolation(f"unknown entity id {eid}", self.doc_id, f"gold[{i}]")
            if not 0 <= span.start <= span.end < n:
                raise SchemaViolation(f"span {tuple(span)} out of range", self.doc_id, f"gold[{i}]")
            if span in seen:
                raise SchemaViolation(f"duplicate gold span {tuple(span)}", self.doc_id, f"gold[{i}]")
            seen.add(span)
        for i, span in enumerate(self.other_mentions):
            if not 0 <= span.start <= span.end < n:
                raise SchemaViolation(f"span {tuple(span)} out of range", self.doc_id, f"other_mentions[{i}]")
            if span in seen:
                raise SchemaViolation(f"span {tuple(span)} in both gold and other_mentions",
                                      self.doc_id, f"other_mentions[{i}]")
            seen.add(span)


def _mention_texts(cluster: Cluster, tokens: Sequence[str]) -> list[tuple[str, Span]]:
    return [(" ".join(tokens[m.start : m.end + 1]), m) for m in cluster.mentions]


def designative_phrase(cluster: Cluster, doc: AnnotatedDocument | MeiDocument) -> str:
    """Most frequent non-pronominal surface form of a cluster.

    Grouping is case-insensitive; the most frequent original casing within the
    winning group is returned. Ties go to the form that occurs first. A cluster
    made only of pronouns falls back to its most frequent mention string.
    """
    return _choose_phrase(cluster, doc.tokens)[0]


def _choose_phrase(cluster: Cluster, tokens: Sequence[str]) -> tuple[str, Span]:
    if not cluster.mentions:
        raise ValueError("designative phrase of an empty cluster")
    texts = _mention_texts(cluster, tokens)
    candidates = [(t, m) for t, m in texts if t.lower() not in PRONOUNS] or texts

    groups: dict[str, list[tuple[str, Span]]] = {}
    for text, span in candidates:
        groups.setdefault(text.lower(), []).append((text, span))
    # dicts keep insertion order, and mentions are sorted by position, so the
    # first group to reach the top count is the earliest one
    best = max(groups.values(), key=len)
    casing = Counter(t for t, _ in best)
    top = max(casing.values())
    phrase = next(t for t, _ in best if casing[t] == top)
    span = next(s for t, s in best if t == phrase)
    return phrase, span


def _rank_clusters(doc: AnnotatedDocument, min_count: int) -> list[Cluster]:
    qualifying = [c for c in doc.clusters if len(c.mentions) >= min_count]
    return sorted(qualifying, key=lambda c: (-len(c.mentions), c.mentions[0]))


def select_major_entities(doc: AnnotatedDocument, k: int = DEFAULT_K,
                          min_count: int = DEFAULT_MIN_COUNT,
                          phrase_overrides: dict[int, str] | None = None) -> MeiDocument:
    """Pick the top-k most frequent clusters (with at least min_count mentions)."""
    if k < 1 or min_count < 1:
        raise ValueError("k and min_count must be >= 1")
    ranked = _rank_clusters(doc, min_count)[:k]
    if not ranked:
        raise NoQualifyingEntities(
            f"{doc.doc_id}: no cluster has at least {min_count} mentions")

    overrides = phrase_overrides or {}
    entities, gold = [], []
    chosen = set()
    for rank, cluster in enumerate(ranked, start=1):
        phrase, span = _choose_phrase(cluster, doc.tokens)
        if rank in overrides:
            phrase, span = overrides[rank], _find_phrase_span(cluster, doc.tokens, overrides[rank])
        entities.append(MajorEntity(rank, phrase, span, len(cluster.mentions)))
        gold.extend((m, rank) for m in cluster.mentions)
        chosen.add(id(cluster))
    other = [m for c in doc.clusters if id(c) not in chosen for m in c.mentions]
    return MeiDocument(doc.doc_id, doc.tokens, doc.sentences, tuple(entities), tuple(gold), tuple(other))


def _find_phrase_span(cluster: Cluster, tokens, phrase: str) -> Span | None:
    for text, span in _mention_texts(cluster, tokens):
        if text.lower() == phrase.lower():
            return span
    return None


def restrict_entities(doc: MeiDocument, entity_ids: Iterable[int]) -> MeiDocument:
    """Keep a subset of entities, renumbered 1..n in the given order.

    Gold mentions of dropped entities move to ``other_mentions``.
    """
    keep = list(entity_ids)
    remap = {old: new for new, old in enumerate(keep, start=1)}
    entities = [MajorEntity(remap[e.entity_id], e.phrase, e.phrase_span, e.mention_count)
                for e in sorted(doc.entities, key=lambda e: remap.get(e.entity_id, 0))
                if e.entity_id in remap]
    gold = [(s, remap[e]) for s, e in doc.gold if e in remap]
    other = list(doc.other_mentions) + [s for s, e in doc.gold if e not in remap]
    return MeiDocument(doc.doc_id, doc.tokens, doc.sentences, tuple(entities), tuple(gold), tuple(other))


# ---------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class Stats:
    mention_count: int
    nonsingleton_mention_count: int
    cluster_count: int
    avg_cluster_size: float
    mean_antecedent_distance: float

    def as_dict(self) -> dict:
        return {
            "mention_count": self.mention_count,
            "nonsingleton_mention_count": self.nonsingleton_mention_count,
            "cluster_count": self.cluster_count,
            "avg_cluster_size": round(self.avg_cluster_size, 4),
            "mean_antecedent_distance": round(self.mean_antecedent_distance, 4),
        }


def _clusters_of(doc) -> list[list[Span]]:
    if isinstance(doc, MeiDocument):
        return [doc.gold_mentions(eid) for eid in doc.entity_ids]
    return [list(c.mentions) for c in doc.clusters]


def antecedent_distances(clusters: list[list[Span]], unit: str = "mentions") -> list[int]:
    """Distance from every non-first mention to its nearest same-cluster predecessor.

    ``unit="mentions"`` counts other mentions starting strictly between the two;
    ``unit="tokens"`` is the difference of start offsets.
    """
    starts = sorted(m.start for c in clusters for m in c)
    out = []
    for cluster in clusters:
        ordered = sorted(cluster)
        for prev, cur in zip(ordered, ordered[1:]):
            if unit == "tokens":
                out.append(cur.start - prev.start)
                continue
            # count starts in the open interval (prev.start, cur.start)
            lo = bisect_right(starts, prev.start)
            hi = bisect_left(starts, cur.start)
            out.append(max(0, hi - lo))
    return out


def dataset_stats(corpus: Sequence[AnnotatedDocument | MeiDocument], distance_unit: str = "mentions") -> Stats:
    if not corpus:
        raise ValueError("dataset_stats of an empty corpus")
    mentions = nonsingleton = clusters = 0
    distances: list[int] = []
    for doc in corpus:
        groups = [g for g in _clusters_of(doc) if g]
        clusters += len(groups)
        mentions += sum(len(g) for g in groups)
        nonsingleton += sum(len(g) for g in groups if len(g) > 1)
        distances.extend(antecedent_distances(groups, distance_unit))
    return Stats(
        mention_count=mentions,
        nonsingleton_mention_count=nonsingleton,
        cluster_count=clusters,
        avg_cluster_size=mentions / clusters if clusters else 0.0,
        mean_antecedent_distance=sum(distances) / len(distances) if distances else 0.0,
    )


# ---------------------------------------------------------------------------
# MEI jsonlines

def mei_to_json(doc: MeiDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "sentences": [list(s) for s in doc.sentences],
        "entities": [
            {"id": e.entity_id, "phrase": e.phrase,
             "phrase_span": list(e.phrase_span) if e.phrase_span is not None else None,
             "count": e.mention_count}
            for e in doc.entities
        ],
        "gold": [[s.start, s.end, e] for s, e in doc.gold],
        "other_mentions": [list(s) for s in doc.other_mentions],
    }


def mei_from_json(obj: dict) -> MeiDocument:
    if not isinstance(obj, dict):
        raise SchemaViolation("expected a JSON object")
    doc_id = _require(obj, "doc_id", str, None)
    tokens = _require(obj, "tokens", list, doc_id)
    sentences = [tuple(_span_from(s, doc_id, f"sentences[{i}]"))
                 for i, s in enumerate(_require(obj, "sentences", list, doc_id))]
    entities = []
    for i, raw in enumerate(_require(obj, "entities", list, doc_id)):
        path = f"entities[{i}]"
        if not isinstance(raw, dict):
            raise SchemaViolation("expected object", doc_id, path)
        for key in ("id", "phrase"):
            if key not in raw:
                raise SchemaViolation("missing required field", doc_id, f"{path}.{key}")
        ps = raw.get("phrase_span")
        entities.append(MajorEntity(
            int(raw["id"]), str(raw["phrase"]),
            _span_from(ps, doc_id, f"{path}.phrase_span") if ps is not None else None,
            int(raw.get("count", 0))))
    gold = []
    for i, g in enumerate(_require(obj, "gold", list, doc_id)):
        if not (isinstance(g, list) and len(g) == 3 and all(isinstance(v, int) for v in g)):
            raise SchemaViolation("expected [start, end, entity_id]", doc_id, f"gold[{i}]")
        gold.append((Span(g[0], g[1]), g[2]))
    other = [_span_from(s, doc_id, f"other_mentions[{i}]")
             for i, s in enumerate(obj.get("other_mentions", []))]
    doc = MeiDocument(doc_id, tuple(tokens), tuple(sentences), tuple(entities), tuple(gold), tuple(other))
    doc.validate()
    return doc


def read_mei_jsonl(path: str | Path) -> list[MeiDocument]:
    return [mei_from_json(obj) for _, obj in iter_jsonl(path)]


def write_mei_jsonl(docs: Iterable[MeiDocument], path: str | Path) -> None:
    write_jsonl_records((mei_to_json(d) for d in docs), path)
