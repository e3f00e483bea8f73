"""Black-box LLM clients: HTTP, scripted mock, and a caching wrapper.

The contract is minimal on purpose: a prompt string goes in, one or more
completion strings come out. Nothing in the rest of the package ever looks
inside a client.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

from .errors import TransportError

DEFAULT_MAX_NEW_TOKENS = 256


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    temperature: float = 0.0
    num_completions: int = 1


@dataclass
class LlmResponse:
    completions: list[str]
    usage_tokens: int = 0


@runtime_checkable
class LlmClient(Protocol):
    def complete(self, request: LlmRequest) -> LlmResponse: ...


@dataclass
class ScriptedRule:
    if_prompt_contains: str
    completions: list[str]


class ScriptedLlm:
    """Deterministic mock driven by prompt-substring trigger rules.

    The first rule whose trigger substring occurs in the prompt wins;
    otherwise the default completions are returned. Configurable from a
    JSON fixture file::

        {"rules": [{"if_prompt_contains": "...", "completions": ["..."]}],
         "default": ["..."]}
    """

    def __init__(self, rules: list[ScriptedRule], default: list[str]):
        self.rules = rules
        self.default = default
        self.call_count = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedLlm":
        data = json.loads(Path(path).read_text())
        rules = [
            ScriptedRule(r["if_prompt_contains"], list(r["completions"]))
            for r in data.get("rules", [])
        ]
        return cls(rules, list(data.get("default", [""])))

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.call_count += 1
        completions = self.default
        for rule in self.rules:
            if rule.if_prompt_contains in request.prompt:
                completions = rule.completions
                break
        out = list(completions)
        while len(out) < request.num_completions:
            out.append(out[-1] if out else "")
        return LlmResponse(completions=out[: request.num_completions])


class HttpLlm:
    """Client for a single-endpoint completion service.

    Request: ``POST url`` with the request fields as JSON; response:
    ``{"completions": [...], "usage_tokens": <int>}``. The auth token comes
    from ``APIGROUND_LLM_TOKEN`` when not passed explicitly.
    """

    def __init__(
        self,
        url: str,
        token: str | None = None,
        max_attempts: int = 3,
        timeout: float = 120.0,
        retry_delay: float = 0.5,
        session=None,
    ):
        self.url = url
        self.token = token if token is not None else os.environ.get("APIGROUND_LLM_TOKEN")
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.retry_delay = retry_delay
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def complete(self, request: LlmRequest) -> LlmResponse:
        payload = {
            "prompt": request.prompt,
            "max_new_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "num_completions": request.num_completions,
        }
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._session.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                data = response.json()
                return LlmResponse(
                    completions=list(data["completions"]),
                    usage_tokens=int(data.get("usage_tokens", 0)),
                )
            except Exception as exc:
                last_error = exc
                if attempt < self.max_attempts:
                    time.sleep(self.retry_delay)
        raise TransportError(
            f"LLM request failed after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
        )


def _request_key(request: LlmRequest) -> str:
    blob = json.dumps(
        {
            "prompt": request.prompt,
            "max_new_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "num_completions": request.num_completions,
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0


class CachingLlm:
    """Answers repeated identical requests from a (optionally persisted) cache.

    Keys are a hash of (prompt, request parameters). The cache file is plain
    JSON, written after every miss so interrupted runs keep their progress.
    Thread-safe: a single lock guards the in-memory map and the file.
    """

    def __init__(self, inner: LlmClient, path: str | Path | None = None):
        self.inner = inner
        self.path = Path(path) if path is not None else None
        self.stats = CacheStats()
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path is not None and self.path.exists():
            self._entries = json.loads(self.path.read_text())

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = _request_key(request)
        with self._lock:
            cached = self._entries.get(key)
        if cached is not None:
            self.stats.hits += 1
            return LlmResponse(
                completions=list(cached["completions"]),
                usage_tokens=int(cached.get("usage_tokens", 0)),
            )
        response = self.inner.complete(request)
        self.stats.misses += 1
        with self._lock:
            self._entries[key] = {
                "completions": response.completions,
                "usage_tokens": response.usage_tokens,
            }
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self.path.write_text(json.dumps(self._entries))
        return response
