"""Chat-completion transports: live OpenAI-compatible HTTP, replay, and recording."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

log = logging.getLogger(__name__)

RETRY_DELAYS = (1.0, 2.0, 4.0)
_RETRY_STATUS = {408, 429, 500, 502, 503, 504}


class GatewayError(RuntimeError):
    pass


class BackendUnavailable(GatewayError):
    pass


class ReplayMiss(GatewayError):
    def __init__(self, key: str):
        super().__init__(f"no recorded response for prompt hash {key}")
        self.key = key


class ProtocolViolation(GatewayError):
    pass


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Transport(Protocol):
    model_id: str
    deterministic: bool

    def complete(self, prompt: str) -> str: ...


@dataclass
class ChatExchange:
    request_text: str
    response_text: str
    model_id: str
    latency: float
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class EndpointSettings:
    base_url: str
    api_key: str
    chat_model: str
    embed_model: str

    @classmethod
    def from_env(cls, prefix: str = "KGRAG_") -> EndpointSettings:
        key = os.environ.get(f"{prefix}API_KEY") or os.environ.get("OPENAI_API_KEY")
        if not key:
            raise BackendUnavailable(f"set {prefix}API_KEY (or OPENAI_API_KEY) for live transport")
        return cls(
            base_url=os.environ.get(f"{prefix}BASE_URL", "https://api.openai.com/v1").rstrip("/"),
            api_key=key,
            chat_model=os.environ.get(f"{prefix}CHAT_MODEL", "gpt-4o-mini-2024-07-18"),
            embed_model=os.environ.get(f"{prefix}EMBED_MODEL", "text-embedding-3-small"),
        )


def post_with_retry(
    client: httpx.Client,
    url: str,
    payload: dict,
    delays: tuple[float, ...] = RETRY_DELAYS,
    sleep: Callable[[float], None] = time.sleep,
) -> dict:
    """POST JSON, retrying transport failures and retryable statuses.

    One initial attempt plus one retry per entry of ``delays``, sleeping
    ``delays[n]`` before retry ``n``. Non-retryable HTTP errors raise at once.
    """
    last: Exception | None = None
    attempts = len(delays) + 1
    for attempt in range(1, attempts + 1):
        try:
            resp = client.post(url, json=payload)
            if resp.status_code in _RETRY_STATUS:
                raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
            resp.raise_for_status()
            return resp.json()
        except httpx.HTTPStatusError as exc:
            if exc.response.status_code not in _RETRY_STATUS:
                raise BackendUnavailable(f"{url}: HTTP {exc.response.status_code}") from exc
            last = exc
        except (httpx.TransportError, json.JSONDecodeError) as exc:
            last = exc
        log.warning("attempt %d/%d to %s failed: %s", attempt, attempts, url, last)
        if attempt < attempts:
            sleep(delays[attempt - 1])
    raise BackendUnavailable(f"{url}: gave up after {attempts} attempts: {last}")


class LiveTransport:
    """OpenAI-compatible ``/chat/completions`` client, temperature pinned to 0."""

    deterministic = False

    def __init__(
        self,
        settings: EndpointSettings,
        client: httpx.Client | None = None,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.settings = settings
        self.model_id = settings.chat_model
        self.client = client or httpx.Client(timeout=timeout)
        self.client.headers["Authorization"] = f"Bearer {settings.api_key}"
        self.sleep = sleep
        self.exchanges: list[ChatExchange] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.settings.chat_model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        t0 = time.perf_counter()
        data = post_with_retry(self.client, f"{self.settings.base_url}/chat/completions", payload, sleep=self.sleep)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolViolation(f"unexpected chat response shape: {str(data)[:200]}") from exc
        if not isinstance(text, str):
            raise ProtocolViolation("chat response content is not a string")
        usage = data.get("usage") or {}
        with self._lock:
            self.exchanges.append(
                ChatExchange(
                    request_text=prompt,
                    response_text=text,
                    model_id=data.get("model", self.model_id),
                    latency=time.perf_counter() - t0,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                )
            )
        return text


def load_fixture(path: str | Path) -> dict[str, str]:
    """Read a replay fixture: JSON Lines of ``{"hash": ..., "response": ...}``."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                table[rec["hash"]] = rec["response"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad fixture record") from exc
    return table


@dataclass
class ReplayTransport:
    """Answers prompts from recorded responses keyed by prompt hash."""

    responses: dict[str, str]
    model_id: str = "replay"
    deterministic: bool = field(default=True, init=False)

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayTransport:
        return cls(load_fixture(path), model_id=f"replay:{Path(path).name}")

    def complete(self, prompt: str) -> str:
        key = prompt_hash(prompt)
        try:
            return self.responses[key]
        except KeyError:
            raise ReplayMiss(key) from None


class RecordingTransport:
    """Wraps another transport and appends every exchange to a fixture file."""

    def __init__(self, inner: Transport, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.model_id = inner.model_id
        self.deterministic = inner.deterministic
        self._lock = threading.Lock()
        self._seen: set[str] = set(load_fixture(self.path)) if self.path.exists() else set()

    def complete(self, prompt: str) -> str:
        response = self.inner.complete(prompt)
        key = prompt_hash(prompt)
        with self._lock:
            if key not in self._seen:
                self._seen.add(key)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"hash": key, "response": response}, ensure_ascii=False) + "\n")
        return response
