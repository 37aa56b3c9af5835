"""Uniform streaming completion interface over three backends: a local model
runner, a hosted chat-completions API, and a deterministic offline mock.

Both live backends speak the same wire format: POST {base}/v1/chat/completions
with {model, messages, stream: true}, replying with incremental "data:" JSON
lines; health probes GET {base}/v1/models. A completion stream yields zero or
more Delta events and exactly one terminal event, either Final or Failure.
The gateway never retries; callers own that decision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping, Sequence

DEFAULT_TIMEOUT_MS = 30_000
DEFAULT_MAX_TOKENS = 1024


class BackendMode(str, Enum):
    LOCAL = "local"
    HOSTED = "hosted"
    MOCK = "mock"


class InvalidConfig(Exception):
    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(message or f"invalid backend config field: {field}")


@dataclass(frozen=True)
class BackendConfig:
    mode: BackendMode
    base_url: str = ""
    api_key: str = ""
    model_name: str = "default"
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_tokens: int = DEFAULT_MAX_TOKENS

    def validate(self) -> None:
        if self.timeout_ms <= 0:
            raise InvalidConfig("timeout_ms")
        if self.max_tokens <= 0:
            raise InvalidConfig("max_tokens")
        if self.mode in (BackendMode.LOCAL, BackendMode.HOSTED) and not self.base_url:
            raise InvalidConfig("base_url")
        if self.mode is BackendMode.HOSTED and not self.api_key:
            raise InvalidConfig("api_key")

    @classmethod
    def from_env(cls, env: Mapping[str, str]) -> "BackendConfig":
        return cls(
            mode=BackendMode(env.get("LLM_MODE", "mock").lower()),
            base_url=env.get("LLM_BASE_URL", "").rstrip("/"),
            api_key=env.get("LLM_API_KEY", ""),
            model_name=env.get("LLM_MODEL", "default"),
            timeout_ms=int(env.get("LLM_TIMEOUT_MS", DEFAULT_TIMEOUT_MS)),
        )


# ---------------------------------------------------------------------------
# Stream events

@dataclass(frozen=True)
class Delta:
    text: str


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int
    approximate: bool = False


@dataclass(frozen=True)
class Final:
    full_text: str
    usage: Usage


class FailureKind(str, Enum):
    TIMEOUT = "timeout"
    SERVER_ERROR = "server_error"
    CONNECTION = "connection"
    AUTH = "auth"
    MALFORMED = "malformed_request"


_RETRYABLE = frozenset({FailureKind.TIMEOUT, FailureKind.SERVER_ERROR, FailureKind.CONNECTION})


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    message: str = ""

    @property
    def retryable(self) -> bool:
        return self.kind in _RETRYABLE


StreamEvent = Delta | Final | Failure


@dataclass(frozen=True)
class Health:
    healthy: bool
    reason: str = ""


Message = dict  # {"role": "system"|"user"|"assistant", "content": str}


def _approx_tokens(text: str) -> int:
    return len(text.split())


def _prompt_tokens(messages: Sequence[Message]) -> int:
    return sum(_approx_tokens(m.get("content", "")) for m in messages)


# ---------------------------------------------------------------------------
# Mock backend

class MockBackend:
    """Deterministic offline stand-in.

    Replies "mock:" + the last user message, unless a script entry matches:
    script is an ordered list of {match, reply} and the first entry whose
    match occurs as a substring of the last user message wins. Replies stream
    in two deltas.
    """

    def __init__(self, script: Sequence[Mapping[str, str]] | None = None):
        self._script = [(e["match"], e["reply"]) for e in (script or [])]

    def _reply_for(self, last_user: str) -> str:
        for match, reply in self._script:
            if match in last_user:
                return reply
        return "mock:" + last_user

    def complete(self, messages: Sequence[Message],
                 params: Mapping | None = None) -> Iterator[StreamEvent]:
        if not messages:
            raise ValueError("messages must be non-empty")
        last_user = ""
        for m in messages:
            if m.get("role") == "user":
                last_user = m.get("content", "")
        reply = self._reply_for(last_user)
        mid = (len(reply) + 1) // 2
        for piece in (reply[:mid], reply[mid:]):
            if piece:
                yield Delta(piece)
        yield Final(
            full_text=reply,
            usage=Usage(_prompt_tokens(messages), _approx_tokens(reply), approximate=True),
        )

    def health_check(self) -> Health:
        return Health(True)


# ---------------------------------------------------------------------------
# HTTP backend (local runner and hosted API share the wire format)

class HttpBackend:
    def __init__(self, cfg: BackendConfig):
        self._cfg = cfg

    def _scrub(self, text: str) -> str:
        key = self._cfg.api_key
        if key:
            text = text.replace(key, "[redacted]")
        return text

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        if self._cfg.mode is BackendMode.HOSTED:
            headers["authorization"] = f"Bearer {self._cfg.api_key}"
        return headers

    def _failure_for_status(self, status: int, body: str) -> Failure:
        detail = self._scrub(body[:200])
        if status in (401, 403):
            return Failure(FailureKind.AUTH, f"status {status}")
        if status >= 500:
            return Failure(FailureKind.SERVER_ERROR, f"status {status}: {detail}")
        return Failure(FailureKind.MALFORMED, f"status {status}: {detail}")

    def complete(self, messages: Sequence[Message],
                 params: Mapping | None = None) -> Iterator[StreamEvent]:
        import httpx

        if not messages:
            raise ValueError("messages must be non-empty")
        cfg = self._cfg
        payload = {
            "model": cfg.model_name,
            "messages": list(messages),
            "stream": True,
            "max_tokens": (params or {}).get("max_tokens", cfg.max_tokens),
        }
        url = f"{cfg.base_url}/v1/chat/completions"
        timeout = cfg.timeout_ms / 1000
        pieces: list[str] = []
        usage: Usage | None = None
        try:
            with httpx.Client(timeout=timeout) as client:
                with client.stream("POST", url, json=payload, headers=self._headers()) as resp:
                    if resp.status_code != 200:
                        body = resp.read().decode("utf-8", "replace")
                        yield self._failure_for_status(resp.status_code, body)
                        return
                    for line in resp.iter_lines():
                        line = line.strip()
                        if not line.startswith("data:"):
                            continue
                        data = line[len("data:"):].strip()
                        if data == "[DONE]":
                            break
                        try:
                            chunk = json.loads(data)
                        except json.JSONDecodeError:
                            yield Failure(FailureKind.MALFORMED, "undecodable stream chunk")
                            return
                        if chunk.get("usage"):
                            u = chunk["usage"]
                            usage = Usage(int(u.get("prompt_tokens", 0)),
                                          int(u.get("completion_tokens", 0)))
                        for choice in chunk.get("choices", []):
                            text = (choice.get("delta") or {}).get("content") or ""
                            if text:
                                pieces.append(text)
                                yield Delta(text)
        except httpx.TimeoutException as exc:
            yield Failure(FailureKind.TIMEOUT, self._scrub(str(exc)))
            return
        except httpx.TransportError as exc:
            yield Failure(FailureKind.CONNECTION, self._scrub(str(exc)))
            return
        full = "".join(pieces)
        if usage is None:
            usage = Usage(_prompt_tokens(messages), _approx_tokens(full), approximate=True)
        yield Final(full_text=full, usage=usage)

    def health_check(self) -> Health:
        import httpx

        cfg = self._cfg
        try:
            resp = httpx.get(f"{cfg.base_url}/v1/models", headers=self._headers(),
                             timeout=cfg.timeout_ms / 1000)
        except httpx.TimeoutException:
            return Health(False, "timeout")
        except httpx.TransportError:
            return Health(False, "connection")
        if resp.status_code == 200:
            return Health(True)
        if resp.status_code in (401, 403):
            return Health(False, "auth")
        if resp.status_code >= 500:
            return Health(False, "server_error")
        return Health(False, f"status {resp.status_code}")


Backend = MockBackend | HttpBackend


def select_backend(cfg: BackendConfig,
                   script: Sequence[Mapping[str, str]] | None = None) -> Backend:
    """Build the handle for a validated config; Mock needs no network at all."""
    cfg.validate()
    if cfg.mode is BackendMode.MOCK:
        return MockBackend(script)
    return HttpBackend(cfg)


def complete(handle: Backend, messages: Sequence[Message],
             params: Mapping | None = None) -> Iterator[StreamEvent]:
    return handle.complete(messages, params)


def health_check(handle: Backend) -> Health:
    return handle.health_check()


def collect(stream: Iterator[StreamEvent]) -> tuple[str, Final | Failure]:
    """Drain a stream; returns (concatenated deltas, terminal event)."""
    pieces: list[str] = []
    terminal: Final | Failure | None = None
    for event in stream:
        if isinstance(event, Delta):
            pieces.append(event.text)
        else:
            terminal = event
            break
    if terminal is None:
        raise RuntimeError("stream ended without a terminal event")
    return "".join(pieces), terminal
