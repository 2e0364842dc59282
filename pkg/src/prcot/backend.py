"""Completion backends: scripted mock, record/replay store, and remote HTTP.

All backends expose ``complete(request) -> CompletionResult``. Wrappers add
caching and recording on top of any inner backend through a shared
append-only JSONL :class:`ResponseStore`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx
import yaml

from .core import BackendSpec, SamplingParams, Usage, dumps_record
from .errors import BackendError, EmptyOutputError, MockScriptError, ReplayMissError, ValidationError

log = logging.getLogger(__name__)

API_KEY_ENV = "PRCOT_API_KEY"
BASE_URL_ENV = "PRCOT_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"

ROLES = ("system", "user", "assistant")
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValidationError(f"unknown chat role {self.role!r}")
        if self.role != "assistant" and not self.content:
            raise ValidationError(f"{self.role} message content must be nonempty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


def purpose_tag(kind: str, perspective: object | None = None) -> str:
    """Build a purpose tag: ``initial``, ``reflection:<id>``, ``synthesis`` or ``judge``."""
    if kind == "reflection":
        if perspective is None:
            raise ValidationError("reflection purpose needs a perspective")
        return f"reflection:{perspective}"
    if kind not in ("initial", "synthesis", "judge"):
        raise ValidationError(f"unknown purpose {kind!r}")
    return kind


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    sampling: SamplingParams = field(default_factory=SamplingParams)
    purpose: str = "initial"

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValidationError("completion request needs at least one message")
        if not self.purpose:
            raise ValidationError("completion request needs a purpose tag")

    @classmethod
    def single(cls, model: str, prompt: str, sampling: SamplingParams, purpose: str) -> CompletionRequest:
        return cls(model, (ChatMessage("user", prompt),), sampling, purpose)

    @property
    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)

    def snapshot(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [m.to_dict() for m in self.messages],
            "sampling": self.sampling.to_dict(),
            "purpose": self.purpose,
        }


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Usage
    backend: str
    cache_hit: bool = False

    def snapshot(self) -> dict[str, Any]:
        return {"text": self.text, "usage": self.usage.to_dict(), "backend": self.backend}


def cache_key(req: CompletionRequest) -> str:
    """Digest over model, messages and sampling. The purpose tag is excluded."""
    payload = {
        "model": req.model,
        "messages": [[m.role, m.content] for m in req.messages],
        "sampling": req.sampling.to_dict(),
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def mock_usage(req: CompletionRequest, reply_text: str, latency: float = 0.0) -> Usage:
    """Whitespace token counts over the request's message contents and the reply."""
    prompt_tokens = sum(whitespace_tokens(m.content) for m in req.messages)
    return Usage(prompt_tokens, whitespace_tokens(reply_text), latency)


class Backend:
    """Base class. Subclasses implement :meth:`_complete`."""

    name = "base"

    def complete(self, req: CompletionRequest) -> CompletionResult:
        result = self._complete(req)
        if not result.text.strip():
            raise EmptyOutputError(f"{self.name} backend returned an empty completion ({req.purpose})")
        return result

    def _complete(self, req: CompletionRequest) -> CompletionResult:
        raise NotImplementedError


# --------------------------------------------------------------------------
# Mock
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MockRule:
    """Reply with ``reply`` when every ``contains`` substring occurs in the prompt.

    ``purpose`` narrows the rule to one purpose tag; a trailing ``*`` matches
    a prefix (``reflection:*``).
    """

    reply: str
    contains: tuple[str, ...] = ()
    purpose: str | None = None

    def matches(self, req: CompletionRequest) -> bool:
        if self.purpose is not None:
            if self.purpose.endswith("*"):
                if not req.purpose.startswith(self.purpose[:-1]):
                    return False
            elif req.purpose != self.purpose:
                return False
        text = req.prompt_text
        return all(s in text for s in self.contains)


class MockBackend(Backend):
    """Deterministic scripted backend.

    Replies come from ``responder`` if given, else from the first matching
    rule, else ``default``. Usage is whitespace-counted.
    """

    name = "mock"

    def __init__(
        self,
        rules: Sequence[MockRule] = (),
        *,
        responder: Callable[[CompletionRequest], str] | None = None,
        default: str | None = None,
        latency: float = 0.0,
    ) -> None:
        self.rules = tuple(rules)
        self.responder = responder
        self.default = default
        self.latency = latency
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, latency: float | None = None) -> MockBackend:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        rules = []
        for i, raw in enumerate(data.get("rules", [])):
            if "reply" not in raw:
                raise ValidationError(f"{path}: rule {i} has no 'reply'")
            contains = raw.get("contains", ())
            if isinstance(contains, str):
                contains = (contains,)
            rules.append(MockRule(raw["reply"], tuple(contains), raw.get("purpose")))
        return cls(
            rules,
            default=data.get("default"),
            latency=float(data.get("latency", 0.0)) if latency is None else latency,
        )

    def reply_for(self, req: CompletionRequest) -> str:
        if self.responder is not None:
            return self.responder(req)
        for rule in self.rules:
            if rule.matches(req):
                return rule.reply
        if self.default is not None:
            return self.default
        raise MockScriptError(f"no mock rule matches request ({req.purpose})")

    def _complete(self, req: CompletionRequest) -> CompletionResult:
        with self._lock:
            self.calls += 1
        text = self.reply_for(req)
        return CompletionResult(text, mock_usage(req, text, self.latency), self.name)


# --------------------------------------------------------------------------
# Response store, replay, caching
# --------------------------------------------------------------------------


class ResponseStore:
    """Append-only map from cache key to recorded response.

    When ``path`` is given, records persist as one JSON object per line:
    ``{"key", "request", "response"}``. The first record for a key wins.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._records: dict[str, dict[str, Any]] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = rec["key"]
                    rec["response"]["text"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    # A torn final line from an interrupted run is tolerated.
                    log.warning("%s:%d: skipping unreadable record (%s)", self.path, lineno, exc)
                    continue
                self._records.setdefault(key, rec)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: str) -> bool:
        return key in self._records

    def get(self, key: str) -> CompletionResult | None:
        rec = self._records.get(key)
        if rec is None:
            return None
        resp = rec["response"]
        return CompletionResult(resp["text"], Usage.from_dict(resp["usage"]), resp["backend"])

    def put(self, req: CompletionRequest, result: CompletionResult) -> None:
        key = cache_key(req)
        with self._lock:
            if key in self._records:
                return
            rec = {"key": key, "request": req.snapshot(), "response": result.snapshot()}
            self._records[key] = rec
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(dumps_record(rec) + "\n")


class ReplayBackend(Backend):
    """Serves recorded responses only; never touches the network."""

    name = "replay"

    def __init__(self, store: ResponseStore) -> None:
        self.store = store

    def _complete(self, req: CompletionRequest) -> CompletionResult:
        hit = self.store.get(cache_key(req))
        if hit is None:
            raise ReplayMissError(f"no recorded response for {req.purpose} request {cache_key(req)[:12]}")
        return CompletionResult(hit.text, hit.usage, self.name)


class CachedBackend(Backend):
    """Wraps ``inner``, storing every fresh result in ``store``.

    With ``read=True`` (caching) a stored result is returned instead of
    calling ``inner``; it keeps the original latency and sets ``cache_hit``.
    With ``read=False`` the wrapper only records.
    """

    def __init__(self, inner: Backend, store: ResponseStore, *, read: bool = True) -> None:
        self.inner = inner
        self.store = store
        self.read = read
        self.name = inner.name

    def _complete(self, req: CompletionRequest) -> CompletionResult:
        if self.read:
            hit = self.store.get(cache_key(req))
            if hit is not None:
                return CompletionResult(hit.text, hit.usage, hit.backend, cache_hit=True)
        result = self.inner.complete(req)
        self.store.put(req, result)
        return result


# --------------------------------------------------------------------------
# Remote
# --------------------------------------------------------------------------


class RemoteBackend(Backend):
    """OpenAI-compatible ``/chat/completions`` client with retry and backoff."""

    name = "remote"

    def __init__(
        self,
        *,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._lock = threading.Lock()
        self.calls = 0

    @staticmethod
    def payload(req: CompletionRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": req.model,
            "messages": [m.to_dict() for m in req.messages],
            "temperature": req.sampling.temperature,
        }
        if req.sampling.max_tokens is not None:
            body["max_tokens"] = req.sampling.max_tokens
        if req.sampling.seed is not None:
            body["seed"] = req.sampling.seed
        return body

    def _post(self, body: Mapping[str, Any]) -> httpx.Response:
        with self._lock:
            self.calls += 1
        return self._client.post(self.url, json=body)

    def _complete(self, req: CompletionRequest) -> CompletionResult:
        body = self.payload(req)
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            start = time.perf_counter()
            try:
                resp = self._post(body)
            except httpx.TransportError as exc:
                last_error = exc
                log.warning("attempt %d: transport error %s", attempt + 1, exc)
                continue
            latency = time.perf_counter() - start
            if resp.status_code in RETRYABLE_STATUS:
                last_error = BackendError(f"HTTP {resp.status_code}")
                log.warning("attempt %d: HTTP %d", attempt + 1, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return self._parse(req, resp, latency)
        raise BackendError(f"request failed after {self.max_retries + 1} attempts: {last_error}")

    def _parse(self, req: CompletionRequest, resp: httpx.Response, latency: float) -> CompletionResult:
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc
        usage = data.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            u = Usage(int(usage["prompt_tokens"]), int(usage["completion_tokens"]), latency)
        else:
            u = mock_usage(req, text, latency)
        return CompletionResult(text, u, self.name)

    def close(self) -> None:
        self._client.close()


def build_backend(
    spec: BackendSpec,
    *,
    base_dir: str | Path | None = None,
    transport: httpx.BaseTransport | None = None,
) -> Backend:
    """Construct the backend stack described by ``spec``.

    Relative paths resolve against ``base_dir``. Remote credentials come from
    the ``PRCOT_API_KEY`` environment variable (``OPENAI_API_KEY`` as fallback).
    """
    root = Path(base_dir) if base_dir is not None else Path.cwd()

    def resolve(p: str | None) -> Path | None:
        if p is None:
            return None
        path = Path(p)
        return path if path.is_absolute() else root / path

    backend: Backend
    if spec.kind == "mock":
        script = resolve(spec.script_path)
        if script is None:
            raise ValidationError("mock backend needs backend.script_path")
        backend = MockBackend.from_file(script, latency=spec.mock_latency)
    elif spec.kind == "replay":
        path = resolve(spec.replay_path or spec.record_path or spec.cache_path)
        if path is None or not path.exists():
            raise ValidationError(f"replay backend needs an existing store file, got {path}")
        return ReplayBackend(ResponseStore(path))
    else:
        backend = RemoteBackend(
            base_url=spec.base_url or os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL),
            api_key=os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY"),
            timeout=spec.timeout,
            max_retries=spec.max_retries,
            transport=transport,
        )
    record = resolve(spec.record_path)
    if record is not None:
        backend = CachedBackend(backend, ResponseStore(record), read=False)
    if spec.cache:
        backend = CachedBackend(backend, ResponseStore(resolve(spec.cache_path)))
    return backend


def iter_store(path: str | Path) -> Iterable[dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
