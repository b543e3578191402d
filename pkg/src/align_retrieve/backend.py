"""Completion / log-probability services: OpenAI-compatible HTTP and a deterministic mock."""
from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Protocol

import httpx

from .errors import BackendError, DegenerateInputError, InvalidConfigError, InvalidParameterError
from .prompt import split_prompt
from .retrieval import tokenize

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "ALIGN_RETRIEVE_API_KEY"


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" or "http"
    base_url: str = ""
    model: str = ""
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    backoff: float = 0.5

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise InvalidConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http" and not (self.base_url and self.model):
            raise InvalidConfigError("http backend requires base_url and model")
        if self.timeout <= 0 or self.max_retries < 1 or self.max_concurrency < 1:
            raise InvalidConfigError("timeout, max_retries and max_concurrency must be positive")


@dataclass(frozen=True)
class TokenLogprobs:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise BackendError("malformed logprobs: tokens and logprobs differ in length")
        if any(lp > 1e-9 for lp in self.logprobs):
            raise BackendError("malformed logprobs: positive log-probability")


class Backend(Protocol):
    def complete(self, prompt: str, k: int = 1, temperature: float = 0.8, top_p: float = 0.95,
                 seed: int = 0, max_new_tokens: int = 64) -> list[str]: ...

    def score_continuation(self, context: str, continuation: str) -> TokenLogprobs: ...


def _jaccard(a: set, b: set) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


class MockBackend:
    """Deterministic stand-in for sampler, evaluator and generator models.

    ``complete`` echoes snippet lines from the prompt, ranked by token Jaccard
    overlap with the last non-empty code line; sample ``j`` takes rank
    ``j + seed``. ``score_continuation`` assigns every word of the
    continuation the log-probability ``overlap - 1``, where ``overlap`` is the
    fraction of the continuation's token set found in the prompt's snippet
    section, so perplexity lies in ``[1, e]``.
    """

    def complete(self, prompt, k=1, temperature=0.8, top_p=0.95, seed=0, max_new_tokens=64):
        if k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {k}")
        snippet_lines, code = split_prompt(prompt)
        lines = [ln.strip() for ln in snippet_lines if ln.strip()]
        if not lines:
            return [""] * k
        tail = next((ln for ln in reversed(code.split("\n")) if ln.strip()), "")
        tail_tokens = set(tokenize(tail))
        sims = [_jaccard(set(tokenize(ln)), tail_tokens) for ln in lines]
        order = sorted(range(len(lines)), key=lambda i: (-sims[i], i))
        return [lines[order[(j + seed) % len(order)]] for j in range(k)]

    def score_continuation(self, context, continuation):
        words = continuation.split()
        if not words:
            raise DegenerateInputError("continuation has no tokens")
        snippet_lines, _ = split_prompt(context)
        cont = set(tokenize(continuation))
        have = set(tokenize("\n".join(snippet_lines)))
        overlap = len(cont & have) / len(cont) if cont else 0.0
        return TokenLogprobs(tuple(words), tuple([overlap - 1.0] * len(words)))


class HttpBackend:
    """Client for an OpenAI-compatible ``/v1/completions`` endpoint."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        if config.kind != "http":
            raise InvalidConfigError("HttpBackend needs an http BackendConfig")
        self.config = config
        headers = {}
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._sleep = sleep
        base = config.base_url.rstrip("/")
        self.url = base + ("/completions" if base.endswith("/v1") else "/v1/completions")

    def close(self):
        self._client.close()

    def _post(self, payload: dict) -> dict:
        status = None
        for attempt in range(self.config.max_retries):
            if attempt:
                self._sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(self.url, json=payload)
            except httpx.TransportError as exc:
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            status = resp.status_code
            if resp.is_success:
                return resp.json()
            if status != 429 and status < 500:
                break
            log.warning("server returned %d (attempt %d)", status, attempt + 1)
        raise BackendError(f"completion request failed (status {status})", status=status)

    def complete(self, prompt, k=1, temperature=0.8, top_p=0.95, seed=0, max_new_tokens=64):
        if k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {k}")
        payload = {
            "model": self.config.model, "prompt": prompt, "n": k,
            "temperature": temperature, "top_p": top_p, "max_tokens": max_new_tokens,
            "logprobs": None, "echo": False, "seed": seed,
        }
        data = self._post(payload)
        choices = sorted(data.get("choices", []), key=lambda c: c.get("index", 0))
        return [c.get("text", "") for c in choices]

    def score_continuation(self, context, continuation):
        if not continuation.strip():
            raise DegenerateInputError("continuation has no tokens")
        full = context + continuation
        payload = {
            "model": self.config.model, "prompt": full, "n": 1,
            "temperature": 0.0, "top_p": 1.0, "max_tokens": 1,
            "logprobs": 1, "echo": True,
        }
        data = self._post(payload)
        try:
            lp = data["choices"][0]["logprobs"]
            tokens, values = lp["tokens"], lp["token_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"response lacks echoed logprobs: {exc}") from exc
        offsets = lp.get("text_offset")
        if offsets is None:
            offsets, pos = [], 0
            for t in tokens:
                offsets.append(pos)
                pos += len(t)
        pick = [i for i, off in enumerate(offsets)
                if len(context) <= off < len(full) and values[i] is not None]
        if not pick:
            raise DegenerateInputError("continuation maps to zero tokens")
        return TokenLogprobs(tuple(tokens[i] for i in pick), tuple(float(values[i]) for i in pick))


def make_backend(config: BackendConfig) -> Backend:
    return MockBackend() if config.kind == "mock" else HttpBackend(config)
