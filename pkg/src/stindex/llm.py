"""Uniform chat-completion interface plus prompt assembly and response parsing.

Backends: an OpenAI-compatible HTTP provider (POST /v1/chat/completions,
bearer auth) and a deterministic replay backend that serves recorded
responses keyed by a stable hash of (model, system text, user text). Under
replay the whole pipeline becomes a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    AuthError,
    BackendUnavailable,
    ContextOverflow,
    PayloadUnparseable,
    ReplayMiss,
)
from .ingest import Chunk
from .schema import SchemaSet, render_schema_instructions

ENV_API_KEY = "STINDEX_API_KEY"
ENV_BASE_URL = "STINDEX_BASE_URL"
ENV_MODEL = "STINDEX_MODEL"

DEFAULT_MEMORY_BUDGET = 2000
DEFAULT_MAX_PROMPT_CHARS = 24000


@dataclass(frozen=True)
class CompletionRequest:
    system: str
    user: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 2048


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0


@dataclass(frozen=True)
class BackendSpec:
    kind: str  # "openai_compatible_http" | "replay_fixture"
    model: str
    base_url: str | None = None
    fixture_path: str | None = None
    auth_env: str = ENV_API_KEY

    @classmethod
    def from_env(cls) -> "BackendSpec":
        return cls(
            kind="openai_compatible_http",
            model=os.environ.get(ENV_MODEL, "gpt-4o-mini"),
            base_url=os.environ.get(ENV_BASE_URL, "https://api.openai.com"),
        )


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay_s: float = 0.5
    max_delay_s: float = 8.0
    sleep: object = time.sleep

    def delay(self, attempt: int) -> float:
        return min(self.max_delay_s, self.base_delay_s * (2 ** attempt))


def request_key(req: CompletionRequest) -> str:
    """Stable replay-fixture key: hash of (model, system text, user text)."""
    blob = json.dumps([req.model, req.system, req.user], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ReplayBackend:
    """Serves recorded responses; raises ReplayMiss for unknown requests."""

    def __init__(self, path: str | Path | None = None, fixtures: dict | None = None):
        if fixtures is not None:
            self.fixtures = dict(fixtures)
        else:
            if path is None or not Path(path).exists():
                raise BackendUnavailable(f"replay fixture file not found: {path}")
            self.fixtures = json.loads(Path(path).read_text(encoding="utf-8"))

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        key = request_key(req)
        if key not in self.fixtures:
            raise ReplayMiss(f"no recorded response for request key {key}")
        return CompletionResponse(text=self.fixtures[key])


class RecordingBackend:
    """Wraps a response function and records (request key -> text) pairs."""

    def __init__(self, respond):
        self.respond = respond
        self.recorded: dict[str, str] = {}

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        text = self.respond(req)
        self.recorded[request_key(req)] = text
        return CompletionResponse(text=text)


class OpenAIHttpBackend:
    """OpenAI-compatible chat-completions client with exponential backoff.

    Transient transport errors and 408/429/5xx responses are retried; 4xx
    auth/validation errors are never retried.
    """

    def __init__(self, spec: BackendSpec, retry: RetryPolicy = RetryPolicy(),
                 session=None):
        if not spec.base_url:
            raise BackendUnavailable("http backend requires a base_url")
        self.spec = spec
        self.retry = retry
        self._session = session or requests.Session()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        url = self.spec.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.spec.auth_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": req.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            if attempt:
                self.retry.sleep(self.retry.delay(attempt - 1))
            started = time.monotonic()
            try:
                resp = self._session.post(url, json=body, headers=headers, timeout=60)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"backend rejected credentials (HTTP {resp.status_code})")
            if resp.status_code in (408, 429) or resp.status_code >= 500:
                last_error = BackendUnavailable(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(
                    f"HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                data = resp.json()
                choice = data["choices"][0]
                text = choice["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed completion response: {exc}") from exc
            usage = data.get("usage") or {}
            return CompletionResponse(
                text=text or "",
                finish_reason=choice.get("finish_reason") or "stop",
                prompt_tokens=int(usage.get("prompt_tokens") or 0),
                completion_tokens=int(usage.get("completion_tokens") or 0),
                latency_ms=(time.monotonic() - started) * 1000.0,
            )
        raise BackendUnavailable(f"backend unreachable after {self.retry.attempts} attempts: {last_error}")


def make_backend(spec: BackendSpec, retry: RetryPolicy = RetryPolicy()):
    if spec.kind == "replay_fixture":
        return ReplayBackend(path=spec.fixture_path)
    if spec.kind == "openai_compatible_http":
        return OpenAIHttpBackend(spec, retry=retry)
    raise BackendUnavailable(f"unknown backend kind {spec.kind!r}")


def complete(req: CompletionRequest, backend, retry: RetryPolicy = RetryPolicy()):
    """Run one completion against a BackendSpec or an instantiated backend."""
    if isinstance(backend, BackendSpec):
        backend = make_backend(backend, retry=retry)
    return backend.complete(req)


# -- prompt assembly --------------------------------------------------------

EXTRACTION_SYSTEM = (
    "You are an information extraction engine. Extract every entity the text "
    "mentions for each dimension listed, honouring each dimension's output "
    "contract. Ground every entity with its exact surface form and character "
    "span. Respond with a single JSON object and nothing else."
)

REFLECTION_SYSTEM = (
    "You are a quality reviewer for extracted entities. Score each candidate "
    "on relevance (is it a real entity of its dimension), accuracy (is the "
    "normalized value right for the surface text), and consistency (does it "
    "agree with the document context), each between 0 and 1. Respond with a "
    "single JSON object and nothing else."
)

NO_PRIOR_ENTITIES = "(no prior entities)"


@dataclass(frozen=True)
class PromptContext:
    """The context blocks woven into every extraction prompt.

    ``state`` is the document/chunk state block; ``memory_lines`` render the
    rolling entity memory oldest-first (truncation drops the oldest lines);
    ``instruction_lines`` carry consistency directives derived from memory;
    ``doc_text`` is the full-document handle for post-processing tools and
    is never sent to the model verbatim.
    """

    state: tuple[tuple[str, str], ...]
    memory_lines: tuple[str, ...] = ()
    instruction_lines: tuple[str, ...] = ()
    doc_text: str | None = None
    memory_budget: int = DEFAULT_MEMORY_BUDGET


def _truncate_memory(lines: tuple[str, ...], budget: int) -> list[str]:
    kept: list[str] = []
    total = 0
    for line in reversed(lines):  # newest first; oldest dropped first
        total += len(line) + 1
        if total > budget:
            break
        kept.append(line)
    kept.reverse()
    return kept


def _output_contract(schema: SchemaSet) -> str:
    names = ", ".join(schema.names)
    return (
        f"Return one JSON object with one key per dimension name ({names}). "
        "Each key maps to an array of entities. Each entity is an object with:\n"
        '- "text": the exact surface form copied from the text\n'
        '- "span": [start, end) character offsets of "text" within this chunk\n'
        '- "value": the dimension\'s normalized value per its contract\n'
        '- "confidence": a number between 0 and 1\n'
        "Use [] for dimensions with no entities in this chunk."
    )


def _assemble(chunk: Chunk, schema: SchemaSet, ctx: PromptContext,
              memory_lines: list[str]) -> str:
    state_block = "\n".join(f"{k}: {v}" for k, v in ctx.state)
    memory_block = "\n".join(memory_lines) if memory_lines else NO_PRIOR_ENTITIES
    instr_block = "\n".join(ctx.instruction_lines) if ctx.instruction_lines else "(none)"
    return (
        "## Dimensions\n" + render_schema_instructions(schema)
        + "\n\n## Document state\n" + state_block
        + "\n\n## Recent entities\n" + memory_block
        + "\n\n## Consistency directives\n" + instr_block
        + "\n\n## Text\n" + chunk.text
        + "\n\n## Output format\n" + _output_contract(schema)
    )


def render_extraction_prompt(
    chunk: Chunk,
    schema: SchemaSet,
    ctx: PromptContext,
    *,
    model: str,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> CompletionRequest:
    """Deterministic extraction prompt; same inputs give identical bytes.

    Memory lines are truncated oldest-first against the context budget; if
    the assembled prompt still exceeds max_prompt_chars with the memory
    block emptied, ContextOverflow is raised.
    """
    memory_lines = _truncate_memory(ctx.memory_lines, ctx.memory_budget)
    user = _assemble(chunk, schema, ctx, memory_lines)
    while len(user) + len(EXTRACTION_SYSTEM) > max_prompt_chars and memory_lines:
        memory_lines = memory_lines[1:]
        user = _assemble(chunk, schema, ctx, memory_lines)
    if len(user) + len(EXTRACTION_SYSTEM) > max_prompt_chars:
        raise ContextOverflow(
            f"prompt needs {len(user) + len(EXTRACTION_SYSTEM)} chars; "
            f"budget is {max_prompt_chars}"
        )
    return CompletionRequest(
        system=EXTRACTION_SYSTEM,
        user=user,
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )


def describe_candidate_value(value, qualifier: str | None = None) -> str:
    if value is None:
        rendered = "?"
    elif isinstance(value, dict):
        rendered = json.dumps(value, sort_keys=True, ensure_ascii=False)
    else:
        rendered = str(value)
    if qualifier:
        rendered += f" ({qualifier})"
    return rendered


def render_reflection_prompt(
    chunk: Chunk,
    candidates: list["CandidateEntity"],
    *,
    model: str,
    temperature: float = 0.0,
    max_tokens: int = 1024,
) -> CompletionRequest:
    lines = [
        f'{i}. [{c.dimension}] "{c.surface}" -> '
        + describe_candidate_value(c.value, c.qualifier)
        for i, c in enumerate(candidates)
    ]
    user = (
        "## Text\n" + chunk.text
        + "\n\n## Candidates\n" + "\n".join(lines)
        + "\n\n## Output format\n"
        + 'Return one JSON object: {"scores": [{"index": <candidate number>, '
        '"relevance": r, "accuracy": a, "consistency": c}, ...]} with one '
        "entry per candidate and every score between 0 and 1."
    )
    return CompletionRequest(
        system=REFLECTION_SYSTEM,
        user=user,
        model=model,
        temperature=temperature,
        max_tokens=max_tokens,
    )


# -- response parsing --------------------------------------------------------


@dataclass(frozen=True)
class CandidateEntity:
    dimension: str
    surface: str
    span: tuple[int, int]
    value: object
    confidence: float
    qualifier: str | None = None


@dataclass(frozen=True)
class ParsedPayload:
    entities: tuple[CandidateEntity, ...]
    dropped: int = 0


def _first_json_object(raw: str) -> str:
    start = raw.find("{")
    if start < 0:
        raise PayloadUnparseable("no JSON object in response")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start:i + 1]
    return raw[start:]  # unterminated; repair may close it


_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")


def _strip_trailing_commas(text: str) -> str:
    return _TRAILING_COMMA_RE.sub(r"\1", text)


def _close_one_bracket(text: str) -> str:
    stack = []
    in_string = False
    escaped = False
    for ch in text:
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            stack.append(ch)
        elif ch in "}]":
            if stack:
                stack.pop()
    if in_string:
        text += '"'
    if stack:
        text += "}" if stack[-1] == "{" else "]"
    return text


def _loads_with_repair(candidate: str) -> dict:
    attempts = [candidate]
    stripped = _strip_trailing_commas(candidate)
    if stripped != candidate:
        attempts.append(stripped)
    attempts.append(_close_one_bracket(stripped))
    for attempt in attempts:
        try:
            data = json.loads(attempt)
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict):
            return data
        break
    raise PayloadUnparseable("response is not a JSON object")


def _coerce_confidence(raw) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        return 0.5
    if value != value:  # NaN
        return 0.5
    return min(1.0, max(0.0, value))


def _candidate_from_item(dimension_name: str, kind: str, item) -> CandidateEntity | None:
    if not isinstance(item, dict):
        return None
    surface = item.get("text")
    span = item.get("span")
    if not isinstance(surface, str) or not surface.strip():
        return None
    if (
        not isinstance(span, (list, tuple))
        or len(span) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in span)
    ):
        return None
    value = item.get("value")
    qualifier = item.get("qualifier")
    if qualifier is not None and not isinstance(qualifier, str):
        qualifier = None
    if kind == "normalized_temporal":
        if value is not None and not isinstance(value, str):
            return None
    elif kind in ("geocoded_spatial", "categorical"):
        if not isinstance(value, str) or not value.strip():
            return None
    elif kind == "structured":
        if not isinstance(value, dict):
            return None
    return CandidateEntity(
        dimension=dimension_name,
        surface=surface,
        span=(span[0], span[1]),
        value=value,
        confidence=_coerce_confidence(item.get("confidence", 0.5)),
        qualifier=qualifier,
    )


def parse_entity_payload(raw: str, schema: SchemaSet) -> ParsedPayload:
    """Parse a model response into candidate entities.

    Tolerates code fences and prose wrappers, applies bounded repair
    (trailing commas, one unterminated bracket), and drops items that fail
    their dimension's structural contract, counting them. Raises
    PayloadUnparseable only when no JSON object is recoverable.
    """
    if not isinstance(raw, str):
        raise PayloadUnparseable("response is not text")
    data = _loads_with_repair(_first_json_object(raw))
    entities: list[CandidateEntity] = []
    dropped = 0
    known = {d.name: d.kind for d in schema.dimensions}
    for key, items in data.items():
        if key not in known:
            dropped += len(items) if isinstance(items, list) else 1
            continue
        if not isinstance(items, list):
            dropped += 1
            continue
        for item in items:
            candidate = _candidate_from_item(key, known[key], item)
            if candidate is None:
                dropped += 1
            else:
                entities.append(candidate)
    return ParsedPayload(entities=tuple(entities), dropped=dropped)


def parse_reflection_payload(raw: str, n_candidates: int) -> dict[int, tuple[float, float, float]]:
    """Parse reflection scores; returns {candidate index: (rel, acc, cons)}.

    Tolerant like parse_entity_payload; indices out of range or entries
    missing any criterion are ignored (those candidates stay unscored).
    """
    data = _loads_with_repair(_first_json_object(raw))
    scores: dict[int, tuple[float, float, float]] = {}
    entries = data.get("scores")
    if not isinstance(entries, list):
        raise PayloadUnparseable("reflection response missing 'scores' array")
    for entry in entries:
        if not isinstance(entry, dict):
            continue
        idx = entry.get("index")
        if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < n_candidates:
            continue
        try:
            triple = (
                float(entry["relevance"]),
                float(entry["accuracy"]),
                float(entry["consistency"]),
            )
        except (KeyError, TypeError, ValueError):
            continue
        scores[idx] = tuple(min(1.0, max(0.0, s)) for s in triple)
    return scores
