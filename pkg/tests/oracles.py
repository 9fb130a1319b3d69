"""Independent reference implementations used to cross-check the library."""
from __future__ import annotations

import itertools
import math


def brute_force_assignment(scores) -> tuple[float, list[tuple[int, int]]]:
    """Best total over every matching of size min(L, C), by enumeration.

    Among optimal matchings the lexicographically smallest pair list wins.
    """
    rows, cols = len(scores), len(scores[0])
    best_total, best_pairs = None, None
    if rows <= cols:
        candidates = (list(enumerate(p)) for p in itertools.permutations(range(cols), rows))
    else:
        candidates = (sorted((r, c) for c, r in enumerate(p))
                      for p in itertools.permutations(range(rows), cols))
    for pairs in candidates:
        total = math.fsum(scores[r][c] for r, c in pairs)
        if best_total is None or total > best_total or (total == best_total and pairs < best_pairs):
            best_total, best_pairs = total, pairs
    return best_total, best_pairs


def set_prf(gold: set, pred: set, entity_id) -> tuple[int, int, int, float]:
    """tp/fp/fn/F1 for one entity from sets of (start, end, label) triples."""
    g = {(s, e) for s, e, lab in gold if lab == entity_id}
    p = {(s, e) for s, e, lab in pred if lab == entity_id}
    tp, fp, fn = len(g & p), len(p - g), len(g - p)
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return tp, fp, fn, f1


def oracle_macro(docs) -> float:
    """``docs`` is a list of (entity_ids, gold_triples, pred_triples)."""
    f1s = [set_prf(g, p, e)[3] for ents, g, p in docs for e in ents]
    return math.fsum(f1s) / len(f1s)


def oracle_micro(docs) -> float:
    per_doc = []
    for ents, g, p in docs:
        weights = {e: sum(1 for *_, lab in g if lab == e) for e in ents}
        num = math.fsum(set_prf(g, p, e)[3] * weights[e] for e in ents)
        per_doc.append(num / sum(weights.values()))
    return math.fsum(per_doc) / len(per_doc)
