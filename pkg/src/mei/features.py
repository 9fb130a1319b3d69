"""Deterministic hashed bag-of-words vectors.

Used by the built-in test encoder and embedding provider; stable across
processes because it hashes with blake2b rather than ``hash()``.
"""
from __future__ import annotations

import hashlib
import string
from typing import Iterable

import numpy as np

DEFAULT_DIM = 64

PUNCTUATION = string.punctuation + "“”‘’«»—–…"


def normalize_word(word: str) -> str:
    """Case-fold and strip surrounding punctuation; pure punctuation is kept as is."""
    stripped = word.strip(PUNCTUATION)
    return (stripped or word).casefold()


def _bucket(feature: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, (1.0 if (value >> 63) & 1 else -1.0)


def hash_vector(words: Iterable[str], dim: int = DEFAULT_DIM) -> np.ndarray:
    vec = np.zeros(dim)
    for w in words:
        idx, sign = _bucket(normalize_word(w), dim)
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
