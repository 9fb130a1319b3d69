"""Chat-completion clients: live HTTP, and a record/replay cassette wrapper."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .prompts import Message

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL = "gpt-4-1106-preview"
API_KEY_ENV = "MEI_LLM_API_KEY"
DEFAULT_MAX_TOKENS = 4096


class ClientError(RuntimeError):
    pass


class BudgetExceeded(ClientError):
    pass


class ChatClient(Protocol):
    def complete(self, messages: Sequence[Message], temperature: float = 0.0,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> str: ...


def request_hash(messages: Sequence[Message]) -> str:
    canonical = json.dumps(list(messages), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class HttpChatClient:
    """OpenAI-style chat-completion endpoint.

    Transport errors, 429 and 5xx responses are retried with exponential
    backoff; other HTTP errors fail immediately. ``token_budget`` caps the
    total tokens spent by this client across threads.
    """

    def __init__(self, endpoint: str = DEFAULT_ENDPOINT, model: str = DEFAULT_MODEL,
                 api_key: str | None = None, timeout: float = 120.0, max_retries: int = 3,
                 backoff: float = 2.0, token_budget: int | None = None,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff = backoff
        self.token_budget = token_budget
        self.tokens_spent = 0
        self._lock = threading.Lock()
        self._http = httpx.Client(timeout=timeout, transport=transport)

    @classmethod
    def from_env(cls, **kwargs) -> "HttpChatClient":
        return cls(api_key=os.environ.get(API_KEY_ENV), **kwargs)

    def _charge(self, tokens: int) -> None:
        with self._lock:
            self.tokens_spent += tokens

    def complete(self, messages, temperature=0.0, max_tokens=DEFAULT_MAX_TOKENS):
        if self.token_budget is not None and self.tokens_spent >= self.token_budget:
            raise BudgetExceeded(f"token budget of {self.token_budget} exhausted")
        payload = {"model": self.model, "messages": list(messages),
                   "temperature": temperature, "max_tokens": max_tokens}
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("chat request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = ClientError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                logger.warning("chat request got HTTP %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ClientError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return self._read_reply(resp, messages)
        raise ClientError(f"giving up after {self.max_retries + 1} attempts: {last_error}")

    def _read_reply(self, resp: httpx.Response, messages) -> str:
        try:
            data = resp.json()
            choice = data["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"unexpected reply shape: {resp.text[:200]}") from exc
        usage = data.get("usage") or {}
        spent = usage.get("total_tokens")
        if spent is None:
            # rough estimate: four characters per token
            spent = (sum(len(m["content"]) for m in messages) + len(text)) // 4
        self._charge(int(spent))
        return text

    def close(self) -> None:
        self._http.close()


class CassetteClient:
    """Record or replay chat completions keyed by a hash of the messages.

    Cassette: jsonlines of ``{"request_hash", "messages", "reply"}``. In
    replay mode a missing entry is a ``ClientError``; nothing touches the
    network. In record mode every call goes to ``inner`` and is appended.
    """

    def __init__(self, path: str | Path, mode: str = "replay", inner: ChatClient | None = None):
        if mode not in ("record", "replay"):
            raise ValueError(f"cassette mode must be 'record' or 'replay', not {mode!r}")
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner client")
        self.path = Path(path)
        self.mode = mode
        self.inner = inner
        self._lock = threading.Lock()
        self.entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self.entries[rec["request_hash"]] = rec["reply"]
        elif mode == "replay":
            raise FileNotFoundError(f"cassette {self.path} does not exist")

    def complete(self, messages, temperature=0.0, max_tokens=DEFAULT_MAX_TOKENS):
        key = request_hash(messages)
        with self._lock:
            if key in self.entries:
                return self.entries[key]
        if self.mode == "replay":
            raise ClientError(f"no recorded reply for request {key[:12]} in {self.path}")
        reply = self.inner.complete(messages, temperature=temperature, max_tokens=max_tokens)
        with self._lock:
            self.entries[key] = reply
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"request_hash": key, "messages": list(messages), "reply": reply},
                                    ensure_ascii=False) + "\n")
        return reply
