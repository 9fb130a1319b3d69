"""Few-shot prompt templates and the builders that render documents into them."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..corpus import Span
from ..derive import MajorEntity, MeiDocument

Message = dict[str, str]

TEMPLATE_KINDS = ("wordlevel", "h2s", "linking", "single")
HEAD_MARK = "#"


@dataclass(frozen=True)
class PromptTemplate:
    kind: str
    instruction: str
    examples: tuple[tuple[str, str], ...]

    def render(self, doc_block: str) -> list[Message]:
        messages = [{"role": "system", "content": self.instruction}]
        for example_in, example_out in self.examples:
            messages.append({"role": "user", "content": example_in})
            messages.append({"role": "assistant", "content": example_out})
        messages.append({"role": "user", "content": doc_block})
        return messages


@lru_cache(maxsize=None)
def load_template(kind: str) -> PromptTemplate:
    if kind not in TEMPLATE_KINDS:
        raise ValueError(f"unknown template kind {kind!r}")
    raw = json.loads(resources.files("mei").joinpath("templates").joinpath(f"{kind}.json").read_text(encoding="utf-8"))
    examples = tuple((ex["input"], ex["output"]) for ex in raw["examples"])
    return PromptTemplate(kind, raw["instruction"], examples)


def slug(phrase: str) -> str:
    return phrase.lower().replace(" ", "_")


def entity_listing(entities: Sequence[MajorEntity]) -> str:
    lines = ["Key Entities:"]
    lines += [f"{e.entity_id}. {e.phrase} (#{slug(e.phrase)})" for e in entities]
    return "\n".join(lines)


def _entity_block(doc: MeiDocument, text: str) -> str:
    return f"{entity_listing(doc.entities)}\n\nText:\n{text}"


def document_text(doc: MeiDocument) -> str:
    return " ".join(doc.tokens)


def build_wordlevel_prompt(doc: MeiDocument) -> list[Message]:
    return load_template("wordlevel").render(_entity_block(doc, document_text(doc)))


def mark_heads(tokens: Sequence[str], heads: Sequence[int]) -> str:
    marked = set(heads)
    return " ".join(t + HEAD_MARK if i in marked else t for i, t in enumerate(tokens))


def build_h2s_prompt(doc: MeiDocument, heads: Sequence[int]) -> list[Message]:
    return load_template("h2s").render(mark_heads(doc.tokens, heads))


def bracket_mentions(tokens: Sequence[str], spans: Sequence[Span],
                     labels: dict[Span, str] | None = None) -> str:
    """Wrap each span as ``[text] (#label)``; an empty label renders ``(#)``.

    Nested spans open outermost first and close innermost first.
    """
    labels = labels or {}
    opens: dict[int, list[Span]] = {}
    closes: dict[int, list[Span]] = {}
    for s in set(Span(*s) for s in spans):
        opens.setdefault(s.start, []).append(s)
        closes.setdefault(s.end, []).append(s)
    out = []
    for i, tok in enumerate(tokens):
        # longer spans open first; shorter ones close first
        prefix = "[" * len(opens.get(i, []))
        word = prefix + tok
        for s in sorted(closes.get(i, []), key=lambda s: -s.start):
            word += f"] (#{labels.get(s, '')})"
        out.append(word)
    return " ".join(out)


def build_linking_prompt(doc: MeiDocument) -> list[Message]:
    spans = [s for s, _ in doc.gold] + list(doc.other_mentions)
    return load_template("linking").render(_entity_block(doc, bracket_mentions(doc.tokens, spans)))


def build_single_prompt(doc: MeiDocument) -> list[Message]:
    return load_template("single").render(_entity_block(doc, document_text(doc)))


def format_messages(messages: Sequence[Message]) -> str:
    """Canonical text form of a message list, used for golden files and hashing."""
    return json.dumps(list(messages), indent=2, ensure_ascii=False) + "\n"
