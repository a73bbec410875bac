"""Chat-completions client with bounded concurrency, retries, and a
persistent response cache.

Greedy decoding makes responses reusable, so every completion is keyed by
a digest of (model, generation config, messages, salt) and appended to a
JSONL cache file. Appends go through a single lock and are flushed to the
kernel per entry, so a killed process loses at most the entry being
written; partially written trailing lines are skipped on reload.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .errors import ExplainrankError
from .prompts import prompt_digest

FINISH_REASONS = ("stop", "length", "error")


class GenerationError(ExplainrankError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 256
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionRequest:
    config: GenerationConfig
    user: str
    system: Optional[str] = None
    cache_salt: str = ""  # varies the cache key without changing the wire request

    def __post_init__(self):
        if not self.user:
            raise ValueError("user prompt must be non-empty")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish_reason: str
    latency: float
    from_cache: bool
    error: Optional[str] = None


def request_cache_key(request: CompletionRequest) -> str:
    canonical = json.dumps(
        {"salt": request.cache_salt, "system": request.system, "user": request.user},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return prompt_digest(canonical, request.config.model_id, request.config)


class ResponseCache:
    """Append-only JSONL response store; single writer, many readers."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                        self._entries[entry["key"]] = entry
                    except (json.JSONDecodeError, KeyError, TypeError):
                        continue  # torn write from a crashed run
        self._fh = self.path.open("a", encoding="utf-8")

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, model_id: str, text: str, finish_reason: str) -> None:
        entry = {
            "key": key,
            "model_id": model_id,
            "text": text,
            "finish_reason": finish_reason,
            "created_unix": time.time(),
        }
        line = json.dumps(entry, ensure_ascii=False) + "\n"
        with self._lock:
            self._entries[key] = entry
            self._fh.write(line)
            self._fh.flush()

    def compact(self) -> int:
        """Rewrite the file with one line per key; returns entries kept."""
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with tmp.open("w", encoding="utf-8") as f:
                for entry in self._entries.values():
                    f.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._fh.close()
            os.replace(tmp, self.path)
            self._fh = self.path.open("a", encoding="utf-8")
            return len(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        with self._lock:
            self._fh.close()


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 5
    backoff_base: float = 0.5
    backoff_cap: float = 30.0

    def delay(self, attempt: int) -> float:
        return min(self.backoff_cap, self.backoff_base * (2**attempt)) + random.uniform(
            0, self.backoff_base
        )


class ClientStats:
    """Thread-safe counters for one client's lifetime."""

    def __init__(self):
        self._lock = threading.Lock()
        self.network_calls = 0
        self.cache_hits = 0
        self.retries = 0
        self.failures = 0

    def _inc(self, name: str, by: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + by)

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {
                "network_calls": self.network_calls,
                "cache_hits": self.cache_hits,
                "retries": self.retries,
                "failures": self.failures,
            }


class LlmClient:
    """Client for any /v1/chat/completions-compatible endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        cache: ResponseCache | None = None,
        retry: RetryPolicy = RetryPolicy(),
        timeout: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.cache = cache
        self.retry = retry
        self.stats = ClientStats()
        self._http = httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post_once(self, request: CompletionRequest) -> tuple[str, str]:
        messages = []
        if request.system is not None:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        body = {
            "model": request.config.model_id,
            "messages": messages,
            "temperature": request.config.temperature,
            "max_tokens": request.config.max_output_tokens,
            "stop": list(request.config.stop_sequences),
        }
        resp = self._http.post(
            f"{self.base_url}/v1/chat/completions", json=body, headers=self._headers()
        )
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Retryable(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise GenerationError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            payload = resp.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (ValueError, KeyError, IndexError, TypeError):
            raise GenerationError(
                f"malformed endpoint response: {resp.text[:500]}"
            ) from None
        if not isinstance(text, str):
            raise GenerationError(f"malformed endpoint response: {resp.text[:500]}")
        return text, ("length" if finish == "length" else "stop")

    def generate(self, request: CompletionRequest) -> CompletionResult:
        """Complete one request, serving from cache when possible.

        Raises GenerationError after retries are exhausted.
        """
        key = request_cache_key(request)
        if self.cache is not None:
            entry = self.cache.get(key)
            if entry is not None:
                self.stats._inc("cache_hits")
                return CompletionResult(
                    text=entry["text"],
                    finish_reason=entry.get("finish_reason", "stop"),
                    latency=0.0,
                    from_cache=True,
                )
        start = time.monotonic()
        attempt = 0
        while True:
            try:
                self.stats._inc("network_calls")
                text, finish = self._post_once(request)
                break
            except (_Retryable, httpx.TimeoutException, httpx.TransportError) as exc:
                if attempt >= self.retry.max_retries:
                    self.stats._inc("failures")
                    raise GenerationError(
                        f"request failed after {attempt} retries: {exc}"
                    ) from exc
                self.stats._inc("retries")
                time.sleep(self.retry.delay(attempt))
                attempt += 1
        latency = time.monotonic() - start
        if self.cache is not None:
            self.cache.put(key, request.config.model_id, text, finish)
        return CompletionResult(text=text, finish_reason=finish, latency=latency, from_cache=False)

    def batch_generate(
        self, requests: Sequence[CompletionRequest], max_in_flight: int = 8
    ) -> list[CompletionResult]:
        """Complete many requests with at most max_in_flight outstanding.

        Results align positionally with the inputs; per-item failures come
        back as finish_reason="error" results instead of aborting the batch.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if not requests:
            return []

        def one(req: CompletionRequest) -> CompletionResult:
            start = time.monotonic()
            try:
                return self.generate(req)
            except ExplainrankError as exc:
                return CompletionResult(
                    text="",
                    finish_reason="error",
                    latency=time.monotonic() - start,
                    from_cache=False,
                    error=str(exc),
                )

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, requests))


class _Retryable(Exception):
    pass
