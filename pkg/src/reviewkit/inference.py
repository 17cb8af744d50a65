"""Client for chat-completions-compatible HTTP endpoints.

Supports blocking and token-streaming generation. Greedy decoding is the
default (temperature 0), so a deterministic server yields byte-identical
outputs across calls. Only transport-level failures (connection errors,
timeouts, 5xx) are retried; 4xx responses are surfaced immediately so
evaluation runs stay honest.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass

import requests

from .prompting import PromptBundle

DEFAULT_MAX_OUTPUT_TOKENS = 4096


class InferenceError(RuntimeError):
    pass


class TransportError(InferenceError):
    """Connection failure or timeout; retried up to max_retries."""


class HTTPStatusError(InferenceError):
    def __init__(self, status_code: int, body_excerpt: str):
        super().__init__(f"endpoint returned HTTP {status_code}: {body_excerpt}")
        self.status_code = status_code
        self.body_excerpt = body_excerpt


class AuthenticationError(HTTPStatusError):
    """401/403; never retried."""


class EmptyCompletionError(InferenceError):
    pass


class StreamProtocolError(InferenceError):
    """Malformed frame or disconnect mid-stream; carries the partial text."""

    def __init__(self, message: str, partial_text: str):
        super().__init__(message)
        self.partial_text = partial_text


@dataclass(frozen=True)
class GenerationConfig:
    endpoint_url: str
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    request_timeout: float = 120.0
    max_retries: int = 2
    retry_backoff: float = 0.5
    api_key_env: str = "REVIEWKIT_API_KEY"
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


@dataclass(frozen=True)
class StreamEvent:
    kind: str  # "delta" | "done" | "error"
    text: str = ""  # delta only
    finish_reason: str = ""  # done only


def _request_body(config: GenerationConfig, bundle: PromptBundle, stream: bool) -> dict:
    return {
        "model": config.model_id,
        "messages": [{"role": m.role, "content": m.content} for m in bundle.messages],
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
        "stream": stream,
    }


class InferenceClient:
    """Shareable across threads; in-flight requests bounded by a semaphore."""

    def __init__(self, config: GenerationConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_concurrency)

    @property
    def _url(self) -> str:
        return self.config.endpoint_url.rstrip("/") + "/chat/completions"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _post(self, body: dict, stream: bool) -> requests.Response:
        """POST with retries on transport failures and 5xx responses."""
        attempts = self.config.max_retries + 1
        last_error: InferenceError | None = None
        for attempt in range(attempts):
            if attempt > 0 and self.config.retry_backoff > 0:
                time.sleep(self.config.retry_backoff * attempt)
            try:
                response = self._session.post(
                    self._url,
                    json=body,
                    headers=self._headers(),
                    timeout=self.config.request_timeout,
                    stream=stream,
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = TransportError(f"request failed: {exc}")
                continue
            if response.status_code == 200:
                return response
            excerpt = response.text[:200]
            response.close()
            if response.status_code in (401, 403):
                raise AuthenticationError(response.status_code, excerpt)
            if response.status_code >= 500:
                last_error = HTTPStatusError(response.status_code, excerpt)
                continue
            raise HTTPStatusError(response.status_code, excerpt)
        assert last_error is not None
        raise last_error

    def complete(self, bundle: PromptBundle) -> str:
        with self._gate:
            response = self._post(_request_body(self.config, bundle, stream=False), stream=False)
            payload = response.json()
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise InferenceError(f"malformed completion response: {exc}") from exc
        if not content:
            raise EmptyCompletionError("endpoint returned an empty completion")
        return content

    def stream(self, bundle: PromptBundle, on_event: Callable[[StreamEvent], None]) -> str:
        """Emit delta events in arrival order, then exactly one done/error event.

        Returns the concatenation of all delta texts. On a malformed frame or
        disconnect, the error event is delivered first and the raised
        StreamProtocolError carries the text received so far.
        """
        with self._gate:
            response = self._post(_request_body(self.config, bundle, stream=True), stream=True)
            parts: list[str] = []
            finish_reason = "stop"
            saw_done = False
            try:
                for data in _sse_data_frames(response):
                    if data == "[DONE]":
                        saw_done = True
                        break
                    try:
                        frame = json.loads(data)
                    except json.JSONDecodeError:
                        raise StreamProtocolError(
                            f"malformed stream frame: {data[:120]!r}", "".join(parts)
                        ) from None
                    choices = frame.get("choices") or []
                    if not choices:
                        continue
                    delta_text = (choices[0].get("delta") or {}).get("content")
                    if delta_text:
                        parts.append(delta_text)
                        on_event(StreamEvent(kind="delta", text=delta_text))
                    if choices[0].get("finish_reason"):
                        finish_reason = choices[0]["finish_reason"]
                if not saw_done:
                    raise StreamProtocolError(
                        "stream ended without a terminal frame", "".join(parts)
                    )
            except StreamProtocolError:
                on_event(StreamEvent(kind="error"))
                raise
            except (requests.RequestException, requests.ConnectionError) as exc:
                on_event(StreamEvent(kind="error"))
                raise StreamProtocolError(f"disconnected mid-stream: {exc}", "".join(parts)) from exc
            finally:
                response.close()
        on_event(StreamEvent(kind="done", finish_reason=finish_reason))
        return "".join(parts)


def _sse_data_frames(response: requests.Response) -> Iterator[str]:
    """Yield the payload of each ``data:`` line; other SSE lines are ignored."""
    for raw in response.iter_lines(decode_unicode=True):
        if not raw:
            continue
        if raw.startswith("data:"):
            yield raw[len("data:") :].strip()


def chat_complete(config: GenerationConfig, bundle: PromptBundle) -> str:
    """One-shot blocking completion with a transient client."""
    return InferenceClient(config).complete(bundle)


def chat_stream(
    config: GenerationConfig,
    bundle: PromptBundle,
    on_event: Callable[[StreamEvent], None],
) -> str:
    """One-shot streaming completion with a transient client."""
    return InferenceClient(config).stream(bundle, on_event)
