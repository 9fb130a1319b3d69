"""Needleman-Wunsch global alignment of token sequences.

Scoring is match +1, mismatch -1, gap -1. Tokens are compared after
case-folding and stripping surrounding punctuation. On traceback, ties prefer
the diagonal, then consuming a source token against a gap, then consuming a
target token against a gap.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..features import normalize_word

MATCH = 1
MISMATCH = -1
GAP = -1


def _codes(a: Sequence[str], b: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict[str, int] = {}
    ca = np.array([vocab.setdefault(normalize_word(w), len(vocab)) for w in a], dtype=np.int64)
    cb = np.array([vocab.setdefault(normalize_word(w), len(vocab)) for w in b], dtype=np.int64)
    return ca, cb


def score_matrix(a: Sequence[str], b: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Fill the DP table; returns ``(H, substitution)``.

    Within a row the horizontal-gap recurrence is a running maximum, so each
    row is computed with one ``maximum.accumulate``.
    """
    n, m = len(a), len(b)
    ca, cb = _codes(a, b)
    sub = np.where(ca[:, None] == cb[None, :], MATCH, MISMATCH).astype(np.int32)
    H = np.empty((n + 1, m + 1), dtype=np.int32)
    cols = np.arange(m + 1, dtype=np.int32)
    H[0] = cols * GAP
    for i in range(1, n + 1):
        best = np.empty(m + 1, dtype=np.int32)
        best[0] = i * GAP
        best[1:] = np.maximum(H[i - 1, :-1] + sub[i - 1], H[i - 1, 1:] + GAP)
        # H[i, j] = max_k (best[k] + GAP * (j - k)); GAP is -1
        H[i] = np.maximum.accumulate(best - cols * GAP) + cols * GAP
    return H, sub


def align(a: Sequence[str], b: Sequence[str]) -> tuple[list[tuple[int | None, int | None]], int]:
    """Globally align ``a`` (source) with ``b`` (target).

    Returns the alignment as ``(i, j)`` pairs in order, ``None`` standing for
    a gap, together with the alignment score.
    """
    H, sub = score_matrix(a, b)
    i, j = len(a), len(b)
    pairs: list[tuple[int | None, int | None]] = []
    while i > 0 or j > 0:
        if i > 0 and j > 0 and H[i, j] == H[i - 1, j - 1] + sub[i - 1, j - 1]:
            i, j = i - 1, j - 1
            pairs.append((i, j))
        elif i > 0 and H[i, j] == H[i - 1, j] + GAP:
            i -= 1
            pairs.append((i, None))
        else:
            j -= 1
            pairs.append((None, j))
    pairs.reverse()
    return pairs, int(H[len(a), len(b)])


def alignment_score(a: Sequence[str], b: Sequence[str]) -> int:
    return int(score_matrix(a, b)[0][len(a), len(b)])


def target_to_source(a: Sequence[str], b: Sequence[str]) -> dict[int, int]:
    """Map each target index aligned to a source token (match or mismatch)."""
    pairs, _ = align(a, b)
    return {j: i for i, j in pairs if i is not None and j is not None}
