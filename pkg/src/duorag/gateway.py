"""Model gateway: every LLM call in the system goes through here.

A gateway pairs a backend (scripted mock, dry-run, or an OpenAI-compatible
chat endpoint) with a token counter and a retry policy, and returns one
LlmCall record per call so callers can meter budgets and audit prompts.
Mock responses are keyed by template name plus a fingerprint of the slot
values; an unscripted key fails loudly instead of inventing text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Mapping, Protocol

import httpx

from .errors import GatewayError, GatewayTimeoutError, TransportError, UnscriptedCallError
from .prompts import get_template, render

logger = logging.getLogger(__name__)

RAW_TEMPLATE = "raw"


class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...


class ApproxTokenCounter:
    """ceil(utf-8 bytes / 4): cheap, deterministic, model-free."""

    def count(self, text: str) -> int:
        return math.ceil(len(text.encode("utf-8")) / 4)


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int | None = None


@dataclass
class LlmCall:
    template: str
    prompt: str
    response: str
    prompt_tokens: int
    response_tokens: int
    latency: float
    attempts: int = 1
    key: str = ""

    def as_dict(self) -> dict:
        # latency is wall-clock and would break byte-determinism of dumps
        return {
            "template": self.template,
            "prompt": self.prompt,
            "response": self.response,
            "prompt_tokens": self.prompt_tokens,
            "response_tokens": self.response_tokens,
            "attempts": self.attempts,
            "key": self.key,
        }


def slot_fingerprint(slots: Mapping[str, str]) -> str:
    canonical = json.dumps(dict(slots), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def mock_key(template_name: str, slots: Mapping[str, str]) -> str:
    return f"{template_name}:{slot_fingerprint(slots)}"


class Backend(Protocol):
    def complete(self, template_name: str, prompt: str, key: str, params: GenerationParams) -> str: ...


class MockBackend:
    """Scripted backend. Exact keys win over per-template wildcards."""

    def __init__(
        self,
        responses: Mapping[str, str] | None = None,
        defaults: Mapping[str, str] | None = None,
    ):
        self.responses = dict(responses or {})
        self.defaults = dict(defaults or {})
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def script(self, key: str, response: str) -> None:
        self.responses[key] = response

    def script_default(self, template_name: str, response: str) -> None:
        self.defaults[template_name] = response

    def complete(self, template_name: str, prompt: str, key: str, params: GenerationParams) -> str:
        with self._lock:
            self.calls.append(key)
            if key in self.responses:
                return self.responses[key]
            if template_name in self.defaults:
                return self.defaults[template_name]
        raise UnscriptedCallError(f"unscripted mock call: {key}")


def load_mock_script(fh: IO[str]) -> MockBackend:
    """Read a line-delimited script of {"key", "response"} objects.

    A key of the form "template:*" becomes the default for that template.
    """
    backend = MockBackend()
    for line_no, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            key, response = obj["key"], obj["response"]
        except (ValueError, KeyError, TypeError) as exc:
            raise GatewayError(f"bad mock script line {line_no}: {exc}") from exc
        template_name, _, fingerprint = key.partition(":")
        if fingerprint == "*":
            backend.script_default(template_name, response)
        else:
            backend.script(key, response)
    return backend


def load_mock_script_path(path: str | Path) -> MockBackend:
    with open(path, encoding="utf-8") as fh:
        return load_mock_script(fh)


class DryRunBackend:
    """Answers every prompt with a placeholder; records what it saw."""

    def __init__(self, placeholder: str = "[dry-run]"):
        self.placeholder = placeholder
        self.prompts: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def complete(self, template_name: str, prompt: str, key: str, params: GenerationParams) -> str:
        with self._lock:
            self.prompts.append((template_name, prompt))
        return self.placeholder


class HttpChatBackend:
    """OpenAI-compatible /chat/completions client.

    Each rendered prompt is sent as a single user message. 429 and 5xx
    responses surface as retryable transport errors; other 4xx are
    configuration errors and are not retried.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self.model = model
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout,
            transport=transport,
        )

    def complete(self, template_name: str, prompt: str, key: str, params: GenerationParams) -> str:
        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
        }
        if params.max_tokens is not None:
            payload["max_tokens"] = params.max_tokens
        try:
            response = self._client.post("/chat/completions", json=payload)
        except httpx.TimeoutException as exc:
            raise GatewayTimeoutError(f"chat call timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"chat transport failure: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"chat endpoint returned {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"chat endpoint rejected the request: {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat response: {exc}") from exc

    def close(self) -> None:
        self._client.close()


class LlmGateway:
    """Render, call, retry, meter."""

    def __init__(
        self,
        backend: Backend,
        counter: TokenCounter | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        default_params: GenerationParams = GenerationParams(),
    ):
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.backend = backend
        self.counter = counter or ApproxTokenCounter()
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._clock = clock
        self.default_params = default_params

    def call(
        self,
        template_name: str,
        slots: Mapping[str, str],
        params: GenerationParams | None = None,
    ) -> LlmCall:
        template = get_template(template_name)
        prompt = render(template, slots)
        key = mock_key(template_name, slots)
        return self._execute(template_name, prompt, key, params or self.default_params)

    def complete(self, prompt: str, params: GenerationParams | None = None) -> LlmCall:
        """Raw completion without a registered template."""
        if not prompt:
            raise ValueError("prompt must be non-empty")
        key = mock_key(RAW_TEMPLATE, {"prompt": prompt})
        return self._execute(RAW_TEMPLATE, prompt, key, params or self.default_params)

    def _execute(self, template_name: str, prompt: str, key: str, params: GenerationParams) -> LlmCall:
        attempt_log: list[str] = []
        start = self._clock()
        last_error: GatewayError | None = None
        for attempt in range(1, self.retries + 1):
            try:
                response = self.backend.complete(template_name, prompt, key, params)
            except UnscriptedCallError:
                raise
            except (TransportError, GatewayTimeoutError) as exc:
                attempt_log.append(f"attempt {attempt}: {exc}")
                last_error = exc
                if attempt < self.retries:
                    delay = self.backoff * 2 ** (attempt - 1)
                    logger.warning("gateway retry %d for %s after: %s", attempt, key, exc)
                    self._sleep(delay)
                continue
            latency = self._clock() - start
            return LlmCall(
                template=template_name,
                prompt=prompt,
                response=response,
                prompt_tokens=self.counter.count(prompt),
                response_tokens=self.counter.count(response),
                latency=latency,
                attempts=attempt,
                key=key,
            )
        assert last_error is not None
        if isinstance(last_error, GatewayTimeoutError):
            raise GatewayTimeoutError(
                f"call {key} timed out after {self.retries} attempts", attempts=attempt_log
            )
        raise TransportError(
            f"call {key} failed after {self.retries} attempts", attempts=attempt_log
        )
