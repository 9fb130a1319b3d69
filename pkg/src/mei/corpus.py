"""Coreference-annotated documents: data model, CoNLL-2012 reader, jsonlines I/O.

Spans are inclusive ``(start, end)`` token index pairs everywhere in the package.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


class UnbalancedCoref(CorpusError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MalformedLine(CorpusError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SchemaViolation(CorpusError):
    def __init__(self, message: str, doc_id: str | None = None, path: str = ""):
        where = f"doc {doc_id!r}" if doc_id is not None else "document"
        super().__init__(f"{where}, field {path or '<root>'}: {message}")
        self.doc_id = doc_id
        self.path = path


class Token(NamedTuple):
    text: str
    index: int


class Span(NamedTuple):
    start: int
    end: int

    def __len__(self) -> int:  # type: ignore[override]
        return self.end - self.start + 1

    def contains(self, index: int) -> bool:
        return self.start <= index <= self.end


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    mentions: tuple[Span, ...]

    def __post_init__(self):
        ordered = tuple(sorted(set(Span(*m) for m in self.mentions)))
        object.__setattr__(self, "mentions", ordered)

    def __len__(self) -> int:
        return len(self.mentions)


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]
    clusters: tuple[Cluster, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "sentences", tuple(tuple(s) for s in self.sentences))
        object.__setattr__(self, "clusters", tuple(self.clusters))

    def __len__(self) -> int:
        return len(self.tokens)

    def token_list(self) -> list[Token]:
        return [Token(t, i) for i, t in enumerate(self.tokens)]

    def span_text(self, span: Span) -> str:
        return " ".join(self.tokens[span.start : span.end + 1])

    def all_mentions(self) -> list[Span]:
        return sorted(m for c in self.clusters for m in c.mentions)

    def validate(self) -> None:
        """Raise SchemaViolation if any document invariant is broken."""
        n = len(self.tokens)
        pos = 0
        for i, (s, e) in enumerate(self.sentences):
            if s != pos or e <= s:
                raise SchemaViolation(
                    "sentence ranges must partition the token sequence",
                    self.doc_id, f"sentences[{i}]")
            pos = e
        if pos != n:
            raise SchemaViolation(
                f"sentences cover {pos} of {n} tokens", self.doc_id, "sentences")
        seen: set[Span] = set()
        for ci, cluster in enumerate(self.clusters):
            for mi, m in enumerate(cluster.mentions):
                if not 0 <= m.start <= m.end < n:
                    raise SchemaViolation(
                        f"span {tuple(m)} outside document of length {n}",
                        self.doc_id, f"clusters[{ci}][{mi}]")
                if m in seen:
                    raise SchemaViolation(
                        f"span {tuple(m)} appears in more than one cluster",
                        self.doc_id, f"clusters[{ci}][{mi}]")
                seen.add(m)


# ---------------------------------------------------------------------------
# CoNLL-2012

_BEGIN_RE = re.compile(r"^#begin document\s*\(?(?P<name>[^);]*)\)?;?(?:\s*part\s+(?P<part>\S+))?")
_COREF_RE = re.compile(r"\((\d+)\)|\((\d+)|(\d+)\)")


@dataclass
class _DocBuilder:
    doc_id: str
    tokens: list[str] = field(default_factory=list)
    sentences: list[tuple[int, int]] = field(default_factory=list)
    sentence_start: int = 0
    mentions: dict[int, list[Span]] = field(default_factory=dict)
    open_stacks: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    ncols: int | None = None

    def close_sentence(self):
        if len(self.tokens) > self.sentence_start:
            self.sentences.append((self.sentence_start, len(self.tokens)))
            self.sentence_start = len(self.tokens)


def _apply_coref(builder: _DocBuilder, column: str, index: int, line_number: int) -> None:
    if column in ("-", "_", ""):
        return
    for m in _COREF_RE.finditer(column):
        single, opened, closed = m.groups()
        if single is not None:
            builder.mentions.setdefault(int(single), []).append(Span(index, index))
        elif opened is not None:
            builder.open_stacks.setdefault(int(opened), []).append((index, line_number))
        else:
            cid = int(closed)
            stack = builder.open_stacks.get(cid)
            if not stack:
                raise UnbalancedCoref(f"cluster {cid} closed without a matching open", line_number)
            start, _ = stack.pop()
            builder.mentions.setdefault(cid, []).append(Span(start, index))


def _finish(builder: _DocBuilder) -> None:
    for cid, stack in builder.open_stacks.items():
        if stack:
            raise UnbalancedCoref(f"cluster {cid} opened but never closed", stack[-1][1])
    builder.close_sentence()


def _build_document(builder: _DocBuilder) -> AnnotatedDocument:
    clusters = []
    owner: dict[Span, int] = {}
    for cid in sorted(builder.mentions):
        kept = []
        for span in sorted(set(builder.mentions[cid])):
            if span in owner:
                logger.warning("%s: span %s already in cluster %d, dropped from cluster %d",
                               builder.doc_id, tuple(span), owner[span], cid)
                continue
            owner[span] = cid
            kept.append(span)
        if kept:
            clusters.append(Cluster(cid, tuple(kept)))
    return AnnotatedDocument(builder.doc_id, tuple(builder.tokens),
                             tuple(builder.sentences), tuple(clusters))


def parse_conll(text: str) -> list[AnnotatedDocument]:
    """Parse CoNLL-2012 formatted text.

    Parts sharing a document name are concatenated into one document, with
    token indices re-based onto the running document length.
    """
    builders: dict[str, _DocBuilder] = {}
    current: _DocBuilder | None = None

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#begin document"):
            if current is not None:
                raise MalformedLine("nested #begin document", line_number)
            m = _BEGIN_RE.match(line)
            name = m.group("name").strip() if m else line[len("#begin document"):].strip()
            current = builders.get(name)
            if current is None:
                current = builders[name] = _DocBuilder(name)
            continue
        if line.startswith("#end document"):
            if current is None:
                raise MalformedLine("#end document without #begin", line_number)
            _finish(current)
            current = None
            continue
        if not line:
            if current is not None:
                current.close_sentence()
            continue
        if line.startswith("#"):
            continue
        if current is None:
            raise MalformedLine("token line outside of a document", line_number)
        cols = line.split()
        if len(cols) < 4:
            raise MalformedLine(f"expected at least 4 columns, got {len(cols)}", line_number)
        if current.ncols is None:
            current.ncols = len(cols)
        elif len(cols) != current.ncols:
            raise MalformedLine(
                f"expected {current.ncols} columns, got {len(cols)}", line_number)
        index = len(current.tokens)
        current.tokens.append(cols[3])
        _apply_coref(current, cols[-1], index, line_number)

    if current is not None:
        raise UnbalancedCoref(f"document {current.doc_id!r} missing #end document",
                              len(text.splitlines()))
    return [_build_document(b) for b in builders.values()]


def read_conll(path: str | Path) -> list[AnnotatedDocument]:
    return parse_conll(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# jsonlines

def _require(obj: dict, key: str, kind, doc_id):
    if key not in obj:
        raise SchemaViolation("missing required field", doc_id, key)
    value = obj[key]
    if not isinstance(value, kind):
        raise SchemaViolation(f"expected {getattr(kind, '__name__', kind)}", doc_id, key)
    return value


def _span_from(value, doc_id, path) -> Span:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise SchemaViolation("expected [start, end] integer pair", doc_id, path)
    return Span(value[0], value[1])


def document_from_json(obj: dict) -> AnnotatedDocument:
    if not isinstance(obj, dict):
        raise SchemaViolation("expected a JSON object")
    doc_id = _require(obj, "doc_id", str, None)
    tokens = _require(obj, "tokens", list, doc_id)
    if not all(isinstance(t, str) for t in tokens):
        raise SchemaViolation("tokens must be strings", doc_id, "tokens")
    sentences = [tuple(_span_from(s, doc_id, f"sentences[{i}]"))
                 for i, s in enumerate(_require(obj, "sentences", list, doc_id))]
    raw_clusters = _require(obj, "clusters", list, doc_id)
    ids = obj.get("cluster_ids")
    if ids is not None and (not isinstance(ids, list) or len(ids) != len(raw_clusters)):
        raise SchemaViolation("cluster_ids must parallel clusters", doc_id, "cluster_ids")
    clusters = []
    for ci, raw in enumerate(raw_clusters):
        if not isinstance(raw, list):
            raise SchemaViolation("expected list of spans", doc_id, f"clusters[{ci}]")
        spans = tuple(_span_from(s, doc_id, f"clusters[{ci}][{mi}]") for mi, s in enumerate(raw))
        clusters.append(Cluster(ids[ci] if ids is not None else ci, spans))
    doc = AnnotatedDocument(doc_id, tuple(tokens), tuple(sentences), tuple(clusters))
    doc.validate()
    return doc


def document_to_json(doc: AnnotatedDocument) -> dict:
    out = {
        "doc_id": doc.doc_id,
        "tokens": list(doc.tokens),
        "sentences": [list(s) for s in doc.sentences],
        "clusters": [[list(m) for m in c.mentions] for c in doc.clusters],
    }
    if any(c.cluster_id != i for i, c in enumerate(doc.clusters)):
        out["cluster_ids"] = [c.cluster_id for c in doc.clusters]
    return out


def iter_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_number, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"line {line_number}: invalid JSON ({exc.msg})") from exc


def write_jsonl_records(records: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[AnnotatedDocument]:
    return [document_from_json(obj) for _, obj in iter_jsonl(path)]


def write_jsonl(docs: Iterable[AnnotatedDocument], path: str | Path) -> None:
    write_jsonl_records((document_to_json(d) for d in docs), path)


def load_corpus(path: str | Path, fmt: str = "jsonl") -> list[AnnotatedDocument]:
    if fmt == "conll":
        return read_conll(path)
    if fmt == "jsonl":
        return read_jsonl(path)
    raise ValueError(f"unknown corpus format {fmt!r}")
