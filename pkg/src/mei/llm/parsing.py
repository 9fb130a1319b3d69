"""Lenient parsers for LLM replies.

None of these raise on malformed text. Problems are appended to an optional
``diagnostics`` list and the offending item is skipped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..corpus import Span
from ..derive import MajorEntity
from ..features import PUNCTUATION
from .align import align, target_to_source
from .prompts import HEAD_MARK, slug

_COREF_HEADER = re.compile(r"^[ \t]*Coreference[ \t]*:[ \t]*$", re.MULTILINE)


@dataclass(frozen=True)
class TaggedToken:
    source_token_index: int
    entity_id: int


def _note(diagnostics: list | None, message: str) -> None:
    if diagnostics is not None:
        diagnostics.append(message)


def strip_preamble(text: str) -> str:
    """Drop the entity-description section that precedes ``Coreference:``."""
    m = _COREF_HEADER.search(text)
    if m:
        return text[m.end():]
    idx = text.find("Coreference:")
    return text[idx + len("Coreference:"):] if idx >= 0 else text


class EntityLookup:
    """Resolve ``#k`` ids and ``#slug`` names to entity ids."""

    def __init__(self, entities: Sequence[MajorEntity]):
        self.ids = {e.entity_id for e in entities}
        self.slugs: dict[str, int] = {}
        for e in entities:
            self.slugs.setdefault(slug(e.phrase), e.entity_id)
        # longest first, so "mr._hilbery" is not shadowed by a shorter prefix
        self._by_length = sorted(self.slugs, key=len, reverse=True)

    def resolve(self, tag: str) -> tuple[int | None, str]:
        """Return ``(entity_id or None, unparsed remainder)`` for text after ``#``."""
        m = re.match(r"\d+", tag)
        if m:
            eid = int(m.group())
            return (eid if eid in self.ids else None), tag[m.end():]
        low = tag.lower()
        for s in self._by_length:
            if low.startswith(s):
                return self.slugs[s], tag[len(s):]
        return None, tag

    def label(self, name: str) -> int | None:
        name = name.strip().lower()
        if name.isdigit() and int(name) in self.ids:
            return int(name)
        return self.slugs.get(name)


def parse_tagged_output(llm_text: str, entities: Sequence[MajorEntity],
                        diagnostics: list | None = None) -> list[tuple[str, int | None]]:
    lookup = EntityLookup(entities)
    out: list[tuple[str, int | None]] = []
    for token in strip_preamble(llm_text).split():
        word, sep, tag = token.partition("#")
        if not sep or not word.strip(PUNCTUATION):
            out.append((token, None))
            continue
        word = word.strip(PUNCTUATION) or word
        eid, rest = lookup.resolve(tag)
        if eid is None:
            _note(diagnostics, f"unknown entity tag {'#' + tag!r} on word {word!r}")
        elif "#" in rest:
            _note(diagnostics, f"word {word!r} carries several tags; kept #{eid}")
        out.append((word, eid))
    return out


def align_and_recover(source_tokens: Sequence[str], llm_words: Sequence[tuple[str, int | None]],
                      diagnostics: list | None = None) -> list[TaggedToken]:
    if not source_tokens or not llm_words:
        return []
    pairs, _ = align(source_tokens, [w for w, _ in llm_words])
    out = []
    for i, j in pairs:
        if j is None:
            continue
        word, eid = llm_words[j]
        if eid is None:
            continue
        if i is None:
            _note(diagnostics, f"tagged word {word!r}#{eid} has no source token; dropped")
            continue
        out.append(TaggedToken(i, eid))
    return out


# ---------------------------------------------------------------------------
# head-to-span replies

_PAREN = re.compile(r"\(([^()]*)\)")


def _split_parentheticals(text: str) -> tuple[list[str], list[tuple[int, str]]]:
    """Words of ``text`` with parenthesized groups removed.

    Each group is returned with the index of the word preceding it.
    """
    words: list[str] = []
    groups: list[tuple[int, str]] = []
    pos = 0
    for m in _PAREN.finditer(text):
        words.extend(text[pos:m.start()].split())
        groups.append((len(words) - 1, m.group(1)))
        pos = m.end()
    words.extend(text[pos:].split())
    return [w[:-len(HEAD_MARK)] if w.endswith(HEAD_MARK) and len(w) > 1 else w for w in words], groups


def _squash(words: Sequence[str]) -> str:
    return "".join(words).casefold()


def find_window(source_tokens: Sequence[str], head: int, text: str) -> Span | None:
    """Smallest window containing ``head`` whose tokens spell ``text``.

    Comparison ignores case and whitespace, so "Alice's" matches the tokens
    ``Alice 's``. Among equally small windows the leftmost wins.
    """
    target = _squash(text.split())
    if not target:
        return None
    n = len(source_tokens)
    norm = [t.casefold() for t in source_tokens]
    max_len = min(n, len(target))
    for length in range(1, max_len + 1):
        for start in range(max(0, head - length + 1), min(head, n - length) + 1):
            if "".join(norm[start : start + length]) == target:
                return Span(start, start + length - 1)
    return None


def parse_h2s_output(llm_text: str, source_tokens: Sequence[str], heads: Sequence[int],
                     diagnostics: list | None = None) -> list[tuple[int, Span]]:
    words, groups = _split_parentheticals(llm_text)
    head_set = set(heads)
    mapping = target_to_source(source_tokens, words) if words and source_tokens else {}
    found: dict[int, str] = {}
    for word_idx, group in groups:
        src = mapping.get(word_idx)
        if src is None or src not in head_set:
            _note(diagnostics, f"parenthetical {group!r} does not follow a marked head; ignored")
            continue
        found.setdefault(src, group)
    out = []
    for h in sorted(head_set):
        group = found.get(h)
        span = find_window(source_tokens, h, group) if group is not None else None
        if span is None:
            what = "no expansion" if group is None else f"expansion {group!r} not found in source"
            _note(diagnostics, f"head {h} ({source_tokens[h]!r}): {what}; using the head alone")
            span = Span(h, h)
        out.append((h, span))
    return out


# ---------------------------------------------------------------------------
# bracketed "[mention] (#label)" replies

_BRACKET_TOKENS = re.compile(r"\]\s*\(\s*#([^)]*)\)|\[|\]|[^\s\[\]]+")

OTHERS = "others"


def parse_bracketed(text: str, diagnostics: list | None = None
                    ) -> tuple[list[str], list[tuple[int, int, str]]]:
    """Split a bracket-annotated reply into plain words and labeled word ranges.

    Returns ``(words, mentions)`` with mentions as inclusive
    ``(first_word, last_word, label_text)``.
    """
    words: list[str] = []
    mentions: list[tuple[int, int, str]] = []
    stack: list[int] = []
    for m in _BRACKET_TOKENS.finditer(text):
        tok = m.group(0)
        if tok == "[":
            stack.append(len(words))
        elif tok.startswith("]"):
            if not stack:
                _note(diagnostics, "closing bracket without an opening one")
                continue
            start = stack.pop()
            if m.group(1) is None:
                _note(diagnostics, f"mention at word {start} closed without a label")
                continue
            if start < len(words):
                mentions.append((start, len(words) - 1, m.group(1).strip()))
        else:
            words.append(tok)
    if stack:
        _note(diagnostics, f"{len(stack)} unclosed bracket(s)")
    return words, mentions


def parse_bracketed_output(llm_text: str, entities: Sequence[MajorEntity], source_tokens: Sequence[str],
                           diagnostics: list | None = None,
                           candidates: set[Span] | None = None) -> list[tuple[Span, int | None]]:
    """Map ``[mention] (#label)`` annotations back onto source spans.

    ``#others`` yields a null label; an empty ``(#)`` is skipped. With
    ``candidates`` given, spans that do not exactly match one are dropped.
    """
    lookup = EntityLookup(entities)
    words, mentions = parse_bracketed(strip_preamble(llm_text), diagnostics)
    if not words or not source_tokens:
        return []
    mapping = target_to_source(source_tokens, words)
    out: list[tuple[Span, int | None]] = []
    seen: set[Span] = set()
    for first, last, label_text in mentions:
        text = " ".join(words[first : last + 1])
        if not label_text:
            _note(diagnostics, f"mention {text!r} left unlabeled; skipped")
            continue
        if label_text.lower() == OTHERS:
            label = None
        else:
            label = lookup.label(label_text)
            if label is None:
                _note(diagnostics, f"mention {text!r}: unknown label #{label_text}; skipped")
                continue
        aligned = [mapping[w] for w in range(first, last + 1) if w in mapping]
        if not aligned:
            _note(diagnostics, f"mention {text!r} not found in source; skipped")
            continue
        span = Span(min(aligned), max(aligned))
        if candidates is not None and span not in candidates:
            _note(diagnostics, f"mention {text!r} maps to {tuple(span)}, not a bracketed span; skipped")
            continue
        if span in seen:
            _note(diagnostics, f"span {tuple(span)} annotated twice; kept the first")
            continue
        seen.add(span)
        out.append((span, label))
    return out

