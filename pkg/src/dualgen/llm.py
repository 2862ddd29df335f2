"""Chat-completion gateway with HTTP, mock, and replay backends."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import httpx

from .errors import (
    ConfigError,
    ExtractionError,
    FixtureMissError,
    JudgeParseError,
    ReplayExhaustedError,
    TransportError,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"

EXTRACT_INSTRUCTION = (
    "Parse the input text, identify and return the names of entities in it that are "
    "marked as places. Ignore any other type of information, only extract and return "
    "place names"
)
GENERATE_INSTRUCTION = (
    "You are a Tibet travel guide. Write an introduction to the tourist viewpoint "
    "named by the user, covering its history, its geography, and the sights and "
    "practical details a visitor would care about."
)
JUDGE_PROMPTS = {
    "fluency": (
        "Rate the fluency of the following text on a scale from 0 to 100. "
        "Reply with a single number.\n\nText:\n{candidate}"
    ),
    "relevance": (
        "Rate how relevant the candidate text is to the reference text on a scale "
        "from 0 to 100. Reply with a single number.\n\n"
        "Reference:\n{reference}\n\nCandidate:\n{candidate}"
    ),
}
JUDGE_SYSTEM = "You are a strict evaluator of generated text. Answer with a number only."


@dataclass(frozen=True)
class ChatParams:
    max_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class ChatRequest:
    system_instruction: str
    user_content: str
    params: ChatParams = field(default_factory=ChatParams)

    def __post_init__(self):
        if not self.user_content:
            raise ValueError("user_content must be non-empty")

    def digest(self) -> str:
        """Stable hash over system, user and params, used to key replay fixtures."""
        canon = json.dumps(
            {"system": self.system_instruction, "user": self.user_content, "params": asdict(self.params)},
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str
    latency_ms: float


BACKEND_KINDS = ("http", "mock_echo", "mock_table", "replay")


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str | None = None
    fixture_path: str | None = None
    model: str = "default"
    timeout_ms: int = 30_000
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_s: float = 0.5
    name: str | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http backend requires an endpoint")
        if self.kind in ("mock_table", "replay") and not self.fixture_path:
            raise ConfigError(f"{self.kind} backend requires fixture_path")
        if self.max_retries < 0 or self.max_in_flight < 1 or self.timeout_ms <= 0:
            raise ConfigError("invalid retry/concurrency/timeout settings")

    @property
    def backend_id(self) -> str:
        return self.name or f"{self.kind}:{self.endpoint or self.fixture_path or '-'}"


class Backend:
    def __init__(self, config: BackendConfig):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def complete(self, request: ChatRequest) -> ChatResponse:
        start = time.perf_counter()
        with self._slots:
            text = self._complete(request)
        return ChatResponse(text, self.config.backend_id, (time.perf_counter() - start) * 1000)

    def _complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


class EchoBackend(Backend):
    def _complete(self, request):
        return request.user_content


class TableBackend(Backend):
    """Exact-match lookup of the user content in a JSON object fixture."""

    def __init__(self, config, table: dict[str, str] | None = None):
        super().__init__(config)
        if table is None:
            table = json.loads(Path(config.fixture_path).read_text(encoding="utf-8"))
        if not isinstance(table, dict):
            raise ConfigError(f"{config.fixture_path}: mock_table fixture must be a JSON object")
        self.table = table

    def _complete(self, request):
        try:
            return self.table[request.user_content]
        except KeyError:
            raise FixtureMissError(f"no fixture entry for {request.user_content[:80]!r}") from None


class ReplayBackend(Backend):
    """Plays back recorded responses, in order, per request hash.

    The fixture is a JSON array of ``{"hash": ..., "text": ...}`` objects; an
    entry may give ``system``/``user``/``params`` instead of ``hash``.
    """

    def __init__(self, config, records: list[dict] | None = None):
        super().__init__(config)
        if records is None:
            records = json.loads(Path(config.fixture_path).read_text(encoding="utf-8"))
        self._queues: dict[str, list[str]] = defaultdict(list)
        for rec in records:
            key = rec.get("hash") or ChatRequest(
                rec.get("system", ""), rec["user"], ChatParams(**rec.get("params", {}))
            ).digest()
            self._queues[key].append(rec["text"])
        self._cursor: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()

    def _complete(self, request):
        key = request.digest()
        with self._lock:
            queue = self._queues.get(key, [])
            pos = self._cursor[key]
            if pos >= len(queue):
                raise ReplayExhaustedError(f"no recorded response left for request {key[:12]}")
            self._cursor[key] = pos + 1
            return queue[pos]


RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HttpBackend(Backend):
    """OpenAI-style ``/chat/completions`` client with retry and exponential backoff."""

    def __init__(self, config, client: httpx.Client | None = None):
        super().__init__(config)
        self._client = client or httpx.Client(timeout=config.timeout_ms / 1000)

    def _body(self, request: ChatRequest) -> dict:
        messages = []
        if request.system_instruction:
            messages.append({"role": "system", "content": request.system_instruction})
        messages.append({"role": "user", "content": request.user_content})
        return {
            "model": self.config.model,
            "messages": messages,
            "max_tokens": request.params.max_tokens,
            "temperature": request.params.temperature,
        }

    def _complete(self, request):
        headers = {}
        if key := os.environ.get(API_KEY_ENV):
            headers["Authorization"] = f"Bearer {key}"
        body = self._body(request)
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.config.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                log.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in RETRY_STATUS:
                last = httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
                log.warning("chat request got %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed chat response: {exc}") from exc
        raise TransportError(
            f"chat endpoint failed after {self.config.max_retries + 1} attempts: {last}"
        )


_BACKENDS = {
    "http": HttpBackend,
    "mock_echo": EchoBackend,
    "mock_table": TableBackend,
    "replay": ReplayBackend,
}


def make_backend(config: BackendConfig) -> Backend:
    return _BACKENDS[config.kind](config)


def complete(request: ChatRequest, backend: Backend | BackendConfig) -> ChatResponse:
    if isinstance(backend, BackendConfig):
        backend = make_backend(backend)
    return backend.complete(request)


# -- model roles -------------------------------------------------------------

_QUOTES = " \t\r\n\"'`“”‘’「」『』"


def extract_location_keyword(
    user_prompt: str,
    backend: Backend,
    instruction: str = EXTRACT_INSTRUCTION,
    params: ChatParams = ChatParams(max_tokens=64),
) -> str:
    if not user_prompt.strip():
        raise ValueError("prompt must be non-empty")
    reply = backend.complete(ChatRequest(instruction, user_prompt, params)).text
    keyword = reply.strip(_QUOTES)
    if not keyword:
        raise ExtractionError(f"no location keyword in reply {reply!r}")
    return keyword


def generate_viewpoint_intro(
    viewpoint_name: str,
    backend: Backend,
    instruction: str = GENERATE_INSTRUCTION,
    params: ChatParams = ChatParams(),
) -> str:
    if not viewpoint_name.strip():
        raise ValueError("viewpoint name must be non-empty")
    return backend.complete(ChatRequest(instruction, viewpoint_name, params)).text


_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")


def parse_judge_reply(reply: str) -> float:
    """First number in the reply on a 0-100 scale, mapped to [0, 1]."""
    m = _NUMBER.search(reply)
    if m is None:
        raise JudgeParseError(f"no score in judge reply {reply!r}")
    return min(1.0, max(0.0, float(m.group()) / 100.0))


def judge_prompt(rubric: str, candidate: str, reference: str | None = None, templates=None) -> str:
    templates = templates or JUDGE_PROMPTS
    if rubric not in ("fluency", "relevance"):
        raise ValueError(f"unknown rubric {rubric!r}")
    if rubric == "relevance" and reference is None:
        raise ValueError("relevance scoring needs a reference")
    return templates[rubric].format(candidate=candidate, reference=reference or "")


def judge_score(
    candidate: str,
    reference: str | None,
    rubric: str,
    backend: Backend,
    templates: dict | None = None,
    max_retries: int | None = None,
) -> float:
    prompt = judge_prompt(rubric, candidate, reference, templates)
    request = ChatRequest(JUDGE_SYSTEM, prompt, ChatParams(max_tokens=16))
    attempts = 1 + (backend.config.max_retries if max_retries is None else max_retries)
    error = None
    for _ in range(attempts):
        try:
            return parse_judge_reply(backend.complete(request).text)
        except JudgeParseError as exc:
            error = exc
    raise error
