"""Map unlabeled coreference clusters to major entities by optimal assignment.

Two baselines: fuzzy-string scores between designative phrases and cluster
mention strings, and cosine similarity between provider embeddings.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Protocol, Sequence

import numpy as np

from .corpus import Cluster
from .derive import MeiDocument
from .features import DEFAULT_DIM, cosine, hash_vector
from .metrics import DuplicateSpan, PredictionSet


class MissingProvider(ValueError):
    pass


class EmbeddingProvider(Protocol):
    def embed_phrase(self, phrase: str, doc: MeiDocument) -> np.ndarray: ...

    def embed_cluster(self, cluster: Cluster, doc: MeiDocument) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Phrase: hashed bag of words. Cluster: mean of its mention vectors."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def embed_phrase(self, phrase: str, doc: MeiDocument) -> np.ndarray:
        return hash_vector(phrase.split(), self.dim)

    def embed_cluster(self, cluster: Cluster, doc: MeiDocument) -> np.ndarray:
        if not cluster.mentions:
            return np.zeros(self.dim)
        vecs = [hash_vector(doc.tokens[m.start : m.end + 1], self.dim) for m in cluster.mentions]
        return np.mean(vecs, axis=0)


# ---------------------------------------------------------------------------
# Kuhn-Munkres

class _Lex:
    """Pair compared lexicographically: exact score first, tie-break key second."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __add__(self, o):
        return _Lex(self.a + o.a, self.b + o.b)

    def __sub__(self, o):
        return _Lex(self.a - o.a, self.b - o.b)

    def __neg__(self):
        return _Lex(-self.a, -self.b)

    def __lt__(self, o):
        return (self.a, self.b) < (o.a, o.b)


_ZERO = _Lex(Fraction(0), 0)


def _hungarian_min(cost: list[list[_Lex]]) -> list[int]:
    """Min-cost assignment of every row to a distinct column (rows <= cols).

    Shortest augmenting path with potentials, O(rows^2 * cols). Returns the
    column of each row.
    """
    n, m = len(cost), len(cost[0])
    u = [_ZERO] * (n + 1)
    v = [_ZERO] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list[_Lex | None] = [None] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            delta = None
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] = u[p[j]] + delta
                    v[j] = v[j] - delta
                else:
                    minv[j] = minv[j] - delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            assignment[p[j] - 1] = j - 1
    return assignment


def kuhn_munkres_max(scores) -> list[tuple[int, int]]:
    """Maximum-total matching of entities (rows) to clusters (columns).

    Returns ``min(L, C)`` ``(entity_index, cluster_index)`` pairs sorted by
    entity index. Arithmetic is exact on the float inputs; among equally good
    matchings the lexicographically smallest pair list is returned.
    """
    matrix = np.asarray(scores, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError("score matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("score matrix entries must be finite")
    n_ent, n_clu = matrix.shape

    # Tie-break key: entity i matched to cluster c contributes (C - c) at the
    # i-th most significant base-(C+1) digit; unmatched entities contribute 0.
    # Maximizing it picks the lexicographically smallest pair list.
    base = n_clu + 1
    weights = [base ** (n_ent - 1 - i) for i in range(n_ent)]
    value = [[_Lex(Fraction(float(matrix[i, c])), (n_clu - c) * weights[i]) for c in range(n_clu)]
             for i in range(n_ent)]

    if n_ent <= n_clu:
        cols = _hungarian_min([[-x for x in row] for row in value])
        return [(i, c) for i, c in enumerate(cols)]
    transposed = [[-value[i][c] for i in range(n_ent)] for c in range(n_clu)]
    ents = _hungarian_min(transposed)
    return sorted((i, c) for c, i in enumerate(ents))


def matching_total(scores, pairs) -> float:
    matrix = np.asarray(scores, dtype=float)
    return math.fsum(float(matrix[i, j]) for i, j in pairs)


# ---------------------------------------------------------------------------
# scoring

def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def fuzzy_ratio(a: str, b: str) -> float:
    a, b = a.casefold(), b.casefold()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def fuzzy_score(phrase: str, cluster: Cluster, doc) -> float:
    if not cluster.mentions:
        raise ValueError("fuzzy score of an empty cluster")
    return sum(fuzzy_ratio(phrase, " ".join(doc.tokens[m.start : m.end + 1]))
               for m in cluster.mentions)


def score_matrix(doc: MeiDocument, clusters: Sequence[Cluster], mode: str,
                 provider: EmbeddingProvider | None = None) -> np.ndarray:
    if mode == "fuzzy":
        return np.array([[fuzzy_score(e.phrase, c, doc) for c in clusters] for e in doc.entities])
    if mode == "cosine":
        if provider is None:
            raise MissingProvider("cosine mapping needs an embedding provider")
        ents = [provider.embed_phrase(e.phrase, doc) for e in doc.entities]
        clus = [provider.embed_cluster(c, doc) for c in clusters]
        return np.array([[cosine(e, c) for c in clus] for e in ents])
    raise ValueError(f"unknown mapping mode {mode!r}")


def map_clusters(doc: MeiDocument, clusters: Sequence[Cluster], mode: str = "fuzzy",
                 provider: EmbeddingProvider | None = None) -> PredictionSet:
    if mode == "cosine" and provider is None:
        raise MissingProvider("cosine mapping needs an embedding provider")
    seen = set()
    for c in clusters:
        for m in c.mentions:
            if m in seen:
                raise DuplicateSpan(f"{doc.doc_id}: span {tuple(m)} appears in two clusters")
            seen.add(m)
    clusters = [c for c in clusters if c.mentions]
    if not clusters or not doc.entities:
        return PredictionSet(doc.doc_id)
    matrix = score_matrix(doc, clusters, mode, provider)
    assignments = []
    for ei, ci in kuhn_munkres_max(matrix):
        eid = doc.entities[ei].entity_id
        assignments.extend((m, eid) for m in clusters[ci].mentions)
    return PredictionSet(doc.doc_id, tuple(assignments))

