"""Prompt-driven major entity identification over a chat client."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence

from ..corpus import Span
from ..derive import MeiDocument
from ..metrics import PredictionSet
from .client import ChatClient
from .parsing import (
    _note,
    align_and_recover,
    parse_bracketed_output,
    parse_h2s_output,
    parse_tagged_output,
)
from .prompts import build_h2s_prompt, build_linking_prompt, build_single_prompt, build_wordlevel_prompt

logger = logging.getLogger(__name__)

PROMPT_KINDS = ("two-stage", "single", "linking")
H2S_MODES = ("llm", "provider")


class HeadToSpanProvider(Protocol):
    def expand(self, doc: MeiDocument, head: int) -> Span: ...


class HeadSingletonProvider:
    """Returns the head word alone; the fallback when no parser is available."""

    def expand(self, doc: MeiDocument, head: int) -> Span:
        return Span(head, head)


def _finish(doc: MeiDocument, labeled: Sequence[tuple[Span, int | None]],
            diagnostics: list | None) -> PredictionSet:
    """Drop out-of-range spans, unknown ids and repeated spans (first wins)."""
    known = set(doc.entity_ids)
    n = len(doc.tokens)
    kept: dict[Span, int | None] = {}
    for span, label in labeled:
        if not (0 <= span.start <= span.end < n):
            _note(diagnostics, f"span {tuple(span)} outside the document; dropped")
            continue
        if label is not None and label not in known:
            _note(diagnostics, f"span {tuple(span)} labeled with unknown entity {label}; dropped")
            continue
        if span in kept:
            if kept[span] != label:
                _note(diagnostics, f"span {tuple(span)} labeled twice; kept entity {kept[span]}")
            continue
        kept[span] = label
    return PredictionSet(doc.doc_id, tuple(kept.items()))


def tagged_heads(doc: MeiDocument, client: ChatClient, diagnostics: list | None = None) -> list[tuple[int, int]]:
    """First stage: word-level tags as ``(token_index, entity_id)``, first tag per token."""
    reply = client.complete(build_wordlevel_prompt(doc), temperature=0)
    words = parse_tagged_output(reply, doc.entities, diagnostics)
    if not any(eid is not None for _, eid in words):
        _note(diagnostics, "word-level reply carries no entity tags")
        return []
    heads: dict[int, int] = {}
    for tag in align_and_recover(doc.tokens, words, diagnostics):
        heads.setdefault(tag.source_token_index, tag.entity_id)
    return sorted(heads.items())


def run_two_stage(doc: MeiDocument, client: ChatClient, h2s_mode: str = "llm",
                  provider: HeadToSpanProvider | None = None,
                  diagnostics: list | None = None) -> PredictionSet:
    """Tag heads word by word, then expand each head to its full span.

    With ``h2s_mode="llm"`` the expansion is a second prompt; with
    ``"provider"`` it comes from ``provider`` (head singletons by default).
    """
    if h2s_mode not in H2S_MODES:
        raise ValueError(f"h2s_mode must be one of {H2S_MODES}, not {h2s_mode!r}")
    heads = tagged_heads(doc, client, diagnostics)
    if not heads:
        return PredictionSet(doc.doc_id)
    entity_of = dict(heads)
    if h2s_mode == "llm":
        reply = client.complete(build_h2s_prompt(doc, [h for h, _ in heads]), temperature=0)
        expanded = parse_h2s_output(reply, doc.tokens, [h for h, _ in heads], diagnostics)
    else:
        provider = provider or HeadSingletonProvider()
        expanded = []
        for h, _ in heads:
            span = provider.expand(doc, h)
            if not span.contains(h):
                _note(diagnostics, f"provider span {tuple(span)} misses head {h}; using the head alone")
                span = Span(h, h)
            expanded.append((h, span))
    return _finish(doc, [(span, entity_of[h]) for h, span in expanded], diagnostics)


def run_single(doc: MeiDocument, client: ChatClient, diagnostics: list | None = None) -> PredictionSet:
    reply = client.complete(build_single_prompt(doc), temperature=0)
    return _finish(doc, parse_bracketed_output(reply, doc.entities, doc.tokens, diagnostics), diagnostics)


def run_linking(doc: MeiDocument, client: ChatClient, diagnostics: list | None = None) -> PredictionSet:
    """Label pre-bracketed gold and other mentions; only those spans are accepted."""
    candidates = {s for s, _ in doc.gold} | set(doc.other_mentions)
    reply = client.complete(build_linking_prompt(doc), temperature=0)
    labeled = parse_bracketed_output(reply, doc.entities, doc.tokens, diagnostics, candidates=candidates)
    return _finish(doc, labeled, diagnostics)


def run_document(doc: MeiDocument, client: ChatClient, prompt: str = "two-stage", h2s_mode: str = "llm",
                 provider: HeadToSpanProvider | None = None,
                 diagnostics: list | None = None) -> PredictionSet:
    if prompt == "two-stage":
        return run_two_stage(doc, client, h2s_mode, provider, diagnostics)
    if prompt == "single":
        return run_single(doc, client, diagnostics)
    if prompt == "linking":
        return run_linking(doc, client, diagnostics)
    raise ValueError(f"prompt must be one of {PROMPT_KINDS}, not {prompt!r}")


def run_corpus(docs: Sequence[MeiDocument], client: ChatClient, prompt: str = "two-stage",
               h2s_mode: str = "llm", provider: HeadToSpanProvider | None = None,
               max_parallel: int = 1) -> list[tuple[PredictionSet, list[str]]]:
    """Run every document, up to ``max_parallel`` at once; output keeps input order."""
    if max_parallel < 1:
        raise ValueError("max_parallel must be at least 1")

    def one(doc):
        diag: list[str] = []
        pred = run_document(doc, client, prompt, h2s_mode, provider, diag)
        return pred, [f"{doc.doc_id}: {m}" for m in diag]

    if max_parallel == 1:
        return [one(d) for d in docs]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(one, docs))
