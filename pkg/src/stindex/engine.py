"""Per-document extraction orchestration.

Chunks are processed strictly in order because the rolling memory is a data
dependency between them; documents are independent and run in parallel.
Each chunk goes through: render prompt -> complete -> parse -> validate ->
reflect -> post-process (temporal resolution, geocoding) -> memory update.
A failure on one chunk never aborts the document.
"""

from __future__ import annotations

import json
import logging
import os
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import llm
from .errors import (
    AuthError,
    BackendUnavailable,
    ContextOverflow,
    PayloadUnparseable,
    ReplayMiss,
    UnresolvableExpression,
)
from .geo import GeocodingService, GeoValue, load_default_gazetteer
from .ingest import Chunk, SourceDocument, chunk_document
from .llm import BackendSpec, CandidateEntity, PromptContext
from .schema import DimensionSchema, SchemaSet
from .temporal import (
    TemporalValue,
    is_relative_expression,
    parse_iso,
    resolve_relative,
    temporal_exact_match,
)

logger = logging.getLogger(__name__)

DEFAULT_REFLECTION_THRESHOLDS = (0.7, 0.7, 0.7)


@dataclass(frozen=True)
class CategoryValue:
    label: str

    def to_payload(self) -> dict:
        return {"type": "category", "label": self.label}

    @classmethod
    def from_payload(cls, payload: dict) -> "CategoryValue":
        return cls(label=payload["label"])


@dataclass(frozen=True)
class StructuredValue:
    attributes: tuple[tuple[str, object], ...]

    def to_payload(self) -> dict:
        return {"type": "structured", "attributes": dict(self.attributes)}

    @classmethod
    def from_payload(cls, payload: dict) -> "StructuredValue":
        return cls(attributes=tuple(sorted(payload["attributes"].items())))


def value_from_payload(payload: dict):
    kind = payload.get("type")
    if kind == "temporal":
        return TemporalValue.from_payload(payload)
    if kind == "geo":
        return GeoValue.from_payload(payload)
    if kind == "category":
        return CategoryValue.from_payload(payload)
    if kind == "structured":
        return StructuredValue.from_payload(payload)
    raise ValueError(f"unknown value payload type {kind!r}")


@dataclass(frozen=True)
class ExtractedEntity:
    """One grounded mention with its typed, normalized value."""

    entity_id: str
    doc_id: str
    chunk_index: int
    dimension: str
    surface: str
    doc_span: tuple[int, int]
    value: object
    confidence: float
    reflection: dict | None = None
    provenance: str = "kept"

    def canonical_value(self) -> str:
        if isinstance(self.value, TemporalValue):
            return self.value.serialize()
        if isinstance(self.value, GeoValue):
            return self.value.resolved_name or self.value.name
        if isinstance(self.value, CategoryValue):
            return self.value.label
        if isinstance(self.value, StructuredValue):
            return json.dumps(dict(self.value.attributes), sort_keys=True,
                              ensure_ascii=False)
        return str(self.value)

    def to_payload(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "dimension": self.dimension,
            "surface": self.surface,
            "doc_span": list(self.doc_span),
            "value": self.value.to_payload(),
            "confidence": self.confidence,
            "reflection": self.reflection,
            "provenance": self.provenance,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ExtractedEntity":
        return cls(
            entity_id=payload["entity_id"],
            doc_id=payload["doc_id"],
            chunk_index=payload["chunk_index"],
            dimension=payload["dimension"],
            surface=payload["surface"],
            doc_span=tuple(payload["doc_span"]),
            value=value_from_payload(payload["value"]),
            confidence=payload["confidence"],
            reflection=payload.get("reflection"),
            provenance=payload.get("provenance", "kept"),
        )


@dataclass(frozen=True)
class FilteredEntity:
    """A candidate removed by validation or reflection (bookkeeping only)."""

    doc_id: str
    chunk_index: int
    dimension: str
    surface: str
    span: tuple[int, int]
    raw_value: object
    confidence: float
    reason: str
    provenance: str  # "filtered_validation" | "filtered_reflection"
    reflection: dict | None = None

    def to_payload(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "dimension": self.dimension,
            "surface": self.surface,
            "span": list(self.span),
            "raw_value": self.raw_value,
            "confidence": self.confidence,
            "reason": self.reason,
            "provenance": self.provenance,
            "reflection": self.reflection,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FilteredEntity":
        return cls(
            doc_id=payload["doc_id"],
            chunk_index=payload["chunk_index"],
            dimension=payload["dimension"],
            surface=payload["surface"],
            span=tuple(payload["span"]),
            raw_value=payload.get("raw_value"),
            confidence=payload["confidence"],
            reason=payload["reason"],
            provenance=payload["provenance"],
            reflection=payload.get("reflection"),
        )


@dataclass
class ExtractionResult:
    doc_id: str
    entities: list[ExtractedEntity] = field(default_factory=list)
    filtered: list[FilteredEntity] = field(default_factory=list)
    chunk_status: list[str] = field(default_factory=list)  # one entry per chunk
    prompt_tokens: int = 0
    completion_tokens: int = 0
    parse_dropped: int = 0
    dedupe_removed: int = 0
    elapsed_ms: float = 0.0  # in-memory only; never persisted


@dataclass(frozen=True)
class ExtractOptions:
    chunk_strategy: str = "sliding_window"
    chunk_size: int = 2000
    chunk_overlap: int = 200
    reflection: bool = True
    reflection_thresholds: tuple[float, float, float] = DEFAULT_REFLECTION_THRESHOLDS
    memory_k: int = 10
    memory_budget: int = llm.DEFAULT_MEMORY_BUDGET
    geo_context_correction: bool = True
    max_prompt_chars: int = llm.DEFAULT_MAX_PROMPT_CHARS
    model: str = "fixture-model"  # used when the backend is a bare instance


class ExtractionMemory:
    """Rolling per-document state used to resolve relative references.

    Per-dimension ring buffers hold the K most recent kept entities (oldest
    evicted first); the temporal anchor is the most recent non-relative
    value (falling back to the document publication date); the spatial
    anchor is the most recent value with a resolved admin level; the country
    tally counts resolved countries for context correction.
    """

    def __init__(self, schema: SchemaSet, k: int = 10):
        self.k = k
        self.recent: dict[str, deque] = {name: deque(maxlen=k) for name in schema.names}
        self.temporal_anchor: TemporalValue | None = None
        self.spatial_anchor: GeoValue | None = None
        self.country_tally: Counter = Counter()
        self._counter = 0

    def update(self, entities: list[ExtractedEntity]) -> None:
        for entity in entities:
            if entity.dimension in self.recent:
                self._counter += 1
                self.recent[entity.dimension].append((self._counter, entity))
            value = entity.value
            if isinstance(value, TemporalValue) and not value.relative:
                self.temporal_anchor = value
            elif isinstance(value, GeoValue) and value.resolved:
                if value.hierarchy.get("admin"):
                    self.spatial_anchor = value
                if value.country:
                    self.country_tally[value.country] += 1

    def anchor_for(self, doc: SourceDocument) -> TemporalValue | None:
        if self.temporal_anchor is not None:
            return self.temporal_anchor
        if doc.pub_date is not None:
            return parse_iso(doc.pub_date.isoformat())
        return None

    def memory_lines(self) -> tuple[str, ...]:
        """Chronological digest lines, oldest first."""
        tagged = []
        for name, ring in self.recent.items():
            for order, entity in ring:
                tagged.append(
                    (order, f'- [{name}] "{entity.surface}" -> {entity.canonical_value()}')
                )
        return tuple(line for _, line in sorted(tagged))

    def instruction_lines(self) -> tuple[str, ...]:
        lines = []
        if self.spatial_anchor is not None:
            region = self.spatial_anchor.hierarchy.get("admin") or (
                self.spatial_anchor.resolved_name or self.spatial_anchor.name
            )
            lines.append(
                f"- Document region so far: {region}, {self.spatial_anchor.country}."
            )
        total = sum(self.country_tally.values())
        if total >= 2:
            country, count = self.country_tally.most_common(1)[0]
            if count / total >= 0.6:
                lines.append(
                    f"- Prefer interpreting ambiguous place names within {country}."
                )
        if self.temporal_anchor is not None:
            lines.append(
                f"- Most recent absolute date: {self.temporal_anchor.serialize()}."
            )
        return tuple(lines)


def build_prompt_context(
    doc: SourceDocument,
    chunk_index: int,
    n_chunks: int,
    memory: ExtractionMemory,
    memory_budget: int,
) -> PromptContext:
    state = (
        ("title", doc.title or "(unknown)"),
        ("publication_date", doc.pub_date.isoformat() if doc.pub_date else "(unknown)"),
        ("source_location", doc.source_location or "(unknown)"),
        ("chunk", f"{chunk_index + 1} of {n_chunks}"),
        ("doc_id", doc.doc_id),
    )
    return PromptContext(
        state=state,
        memory_lines=memory.memory_lines(),
        instruction_lines=memory.instruction_lines(),
        doc_text=doc.body,
        memory_budget=memory_budget,
    )


# -- validation --------------------------------------------------------------


def _validate_structured(candidate: CandidateEntity, dim: DimensionSchema) -> str | None:
    assert isinstance(candidate.value, dict)
    for attr, attr_kind in dim.attributes or ():
        if attr not in candidate.value:
            return "missing_attribute"
        raw = candidate.value[attr]
        if attr_kind == "number":
            if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
                return "bad_attribute_type"
            try:
                float(raw)
            except (TypeError, ValueError):
                return "bad_attribute_type"
        elif isinstance(raw, (dict, list)):
            return "bad_attribute_type"
    return None


def validate_candidates(
    candidates: list[CandidateEntity], schema: SchemaSet, chunk: Chunk,
) -> tuple[list[CandidateEntity], list[tuple[CandidateEntity, str]]]:
    """Structural validation; rejections carry reason codes."""
    valid: list[CandidateEntity] = []
    rejected: list[tuple[CandidateEntity, str]] = []
    for candidate in candidates:
        start, end = candidate.span
        if not (0 <= start < end <= len(chunk.text)):
            rejected.append((candidate, "bad_span"))
            continue
        dim = schema.dimension(candidate.dimension)
        if dim.kind == "normalized_temporal":
            ok = False
            if isinstance(candidate.value, str):
                try:
                    parse_iso(candidate.value)
                    ok = True
                except Exception:
                    ok = False
            if not ok and is_relative_expression(candidate.surface):
                ok = True
            if not ok:
                rejected.append((candidate, "bad_iso"))
                continue
        elif dim.kind == "categorical":
            if dim.matches_label(str(candidate.value)) is None:
                rejected.append((candidate, "bad_label"))
                continue
        elif dim.kind == "structured":
            reason = _validate_structured(candidate, dim)
            if reason:
                rejected.append((candidate, reason))
                continue
        valid.append(candidate)
    return valid, rejected


# -- reflection ---------------------------------------------------------------


@dataclass
class ReflectionOutcome:
    kept: list[tuple[CandidateEntity, dict | None]]
    filtered: list[tuple[CandidateEntity, dict]]
    failed: bool = False
    prompt_tokens: int = 0
    completion_tokens: int = 0


def reflect(
    candidates: list[CandidateEntity],
    chunk: Chunk,
    backend,
    thresholds: tuple[float, float, float] = DEFAULT_REFLECTION_THRESHOLDS,
    *,
    model: str,
) -> ReflectionOutcome:
    """Score all candidates in one extra completion and apply the keep rule.

    A candidate is kept iff all three scores meet their thresholds
    (inclusive). If the reflection call fails or is unparseable, every
    candidate is kept unscored (fail-open) and the event is logged.
    """
    req = llm.render_reflection_prompt(chunk, candidates, model=model)
    try:
        resp = backend.complete(req)
        scores = llm.parse_reflection_payload(resp.text, len(candidates))
    except (BackendUnavailable, AuthError, ReplayMiss, PayloadUnparseable) as exc:
        logger.warning(
            "reflection failed for %s chunk %d (%s); keeping all candidates",
            chunk.doc_id, chunk.chunk_index, exc,
        )
        return ReflectionOutcome(
            kept=[(c, None) for c in candidates], filtered=[], failed=True,
        )
    outcome = ReflectionOutcome(
        kept=[], filtered=[],
        prompt_tokens=resp.prompt_tokens, completion_tokens=resp.completion_tokens,
    )
    for i, candidate in enumerate(candidates):
        triple = scores.get(i)
        if triple is None:
            outcome.kept.append((candidate, None))  # unscored: fail open
            continue
        record = dict(zip(("relevance", "accuracy", "consistency"), triple))
        if all(s >= t for s, t in zip(triple, thresholds)):
            outcome.kept.append((candidate, record))
        else:
            outcome.filtered.append((candidate, record))
    return outcome


# -- deduplication ------------------------------------------------------------


def _spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def dedupe_overlap(entities: list[ExtractedEntity]) -> tuple[list[ExtractedEntity], int]:
    """Merge chunk-overlap duplicates within one document.

    Two kept entities are duplicates iff they share dimension and normalized
    value and their doc spans overlap; the earlier chunk's entity survives
    with the pair's max confidence. Returns (survivors in original order,
    number removed).
    """
    groups: dict[tuple[str, str], list[ExtractedEntity]] = {}
    for entity in entities:
        groups.setdefault((entity.dimension, entity.canonical_value()), []).append(entity)

    replacement: dict[str, ExtractedEntity | None] = {}
    for group in groups.values():
        ordered = sorted(group, key=lambda e: (e.chunk_index, e.doc_span, e.entity_id))
        survivors: list[ExtractedEntity] = []
        for entity in ordered:
            merged = False
            for i, survivor in enumerate(survivors):
                if _spans_overlap(entity.doc_span, survivor.doc_span):
                    survivors[i] = replace(
                        survivor, confidence=max(survivor.confidence, entity.confidence)
                    )
                    replacement[entity.entity_id] = None
                    merged = True
                    break
            if not merged:
                survivors.append(entity)
        for survivor in survivors:
            replacement[survivor.entity_id] = survivor

    result = []
    removed = 0
    for entity in entities:
        final = replacement[entity.entity_id]
        if final is None:
            removed += 1
        else:
            result.append(final)
    return result, removed


# -- post-processing ----------------------------------------------------------


def _finalize_temporal(
    candidate: CandidateEntity, memory: ExtractionMemory, doc: SourceDocument,
) -> TemporalValue | str:
    """Returns the final TemporalValue or a rejection reason code."""
    llm_value: TemporalValue | None = None
    if isinstance(candidate.value, str):
        try:
            llm_value = parse_iso(candidate.value)
        except Exception:
            llm_value = None
    if is_relative_expression(candidate.surface):
        anchor = memory.anchor_for(doc)
        if anchor is not None:
            try:
                resolved = resolve_relative(candidate.surface, anchor)
            except UnresolvableExpression:
                resolved = None
            if resolved is not None:
                if llm_value is not None and not temporal_exact_match(resolved, llm_value):
                    logger.info(
                        "temporal correction for %r: model said %s, resolver says %s",
                        candidate.surface, llm_value.serialize(), resolved.serialize(),
                    )
                return resolved
        if llm_value is not None:
            # trusted model value for a relative expression; never an anchor
            return replace(
                llm_value, original_expression=candidate.surface, relative=True
            )
        return "unresolved_relative"
    if llm_value is None:
        return "bad_iso"
    return replace(llm_value, original_expression=candidate.surface)


def _remap_hierarchy(value: GeoValue, dim: DimensionSchema) -> GeoValue:
    if not dim.hierarchy or tuple(dim.hierarchy) == ("country", "admin", "locality"):
        return value
    canonical = ("country", "admin", "locality")
    remapped = {}
    for level_name, key in zip(dim.hierarchy, canonical):
        if key in value.hierarchy:
            remapped[level_name] = value.hierarchy[key]
    return replace(value, hierarchy=remapped)


def _finalize_spatial(
    candidate: CandidateEntity,
    memory: ExtractionMemory,
    geocoder: GeocodingService,
    dim: DimensionSchema,
    correct: bool,
) -> GeoValue:
    # `correct` gates every memory-derived signal, so disabling context
    # correction yields the plain unbiased lookup; the model-provided
    # qualifier is chunk-local and always honoured.
    admin_hint = candidate.qualifier
    if not admin_hint and correct and memory.spatial_anchor is not None:
        admin_hint = memory.spatial_anchor.hierarchy.get("admin")
    value = geocoder.geocode(str(candidate.value), admin_hint=admin_hint)
    if correct:
        value = geocoder.apply_context_correction(value, memory.country_tally)
    return _remap_hierarchy(value, dim)


def _coerce_attribute(raw, attr_kind: str):
    if attr_kind == "number":
        number = float(raw)
        return int(number) if number.is_integer() else number
    return str(raw)


def _finalize_candidate(
    candidate: CandidateEntity,
    schema: SchemaSet,
    memory: ExtractionMemory,
    doc: SourceDocument,
    geocoder: GeocodingService,
    opts: ExtractOptions,
):
    dim = schema.dimension(candidate.dimension)
    if dim.kind == "normalized_temporal":
        return _finalize_temporal(candidate, memory, doc)
    if dim.kind == "geocoded_spatial":
        return _finalize_spatial(candidate, memory, geocoder, dim,
                                 opts.geo_context_correction)
    if dim.kind == "categorical":
        return CategoryValue(label=dim.matches_label(str(candidate.value)))
    attrs = tuple(
        sorted(
            (attr, _coerce_attribute(candidate.value[attr], attr_kind))
            for attr, attr_kind in dim.attributes or ()
        )
    )
    return StructuredValue(attributes=attrs)


# -- document orchestration ----------------------------------------------------


def _filtered_from(candidate: CandidateEntity, doc_id: str, chunk_index: int,
                   reason: str, provenance: str,
                   reflection: dict | None = None) -> FilteredEntity:
    raw_value = candidate.value
    if isinstance(raw_value, dict):
        raw_value = dict(raw_value)
    return FilteredEntity(
        doc_id=doc_id,
        chunk_index=chunk_index,
        dimension=candidate.dimension,
        surface=candidate.surface,
        span=candidate.span,
        raw_value=raw_value,
        confidence=candidate.confidence,
        reason=reason,
        provenance=provenance,
        reflection=reflection,
    )


def extract_document(
    doc: SourceDocument,
    schema: SchemaSet,
    backend,
    opts: ExtractOptions = ExtractOptions(),
    geocoder: GeocodingService | None = None,
) -> ExtractionResult:
    """Run the full extraction pipeline over one document."""
    import time as _time

    started = _time.monotonic()
    if isinstance(backend, BackendSpec):
        model = backend.model
        backend = llm.make_backend(backend)
    else:
        model = opts.model
    if geocoder is None:
        geocoder = GeocodingService(load_default_gazetteer())

    chunks = chunk_document(
        doc, opts.chunk_strategy, opts.chunk_size, opts.chunk_overlap
    )
    memory = ExtractionMemory(schema, k=opts.memory_k)
    result = ExtractionResult(doc_id=doc.doc_id)

    for chunk in chunks:
        ctx = build_prompt_context(doc, chunk.chunk_index, len(chunks), memory,
                                   opts.memory_budget)
        try:
            req = llm.render_extraction_prompt(
                chunk, schema, ctx, model=model,
                max_prompt_chars=opts.max_prompt_chars,
            )
            resp = backend.complete(req)
        except (BackendUnavailable, AuthError, ReplayMiss, ContextOverflow) as exc:
            logger.warning("chunk %d of %s failed: %s", chunk.chunk_index, doc.doc_id, exc)
            result.chunk_status.append("backend_failed")
            continue
        result.prompt_tokens += resp.prompt_tokens
        result.completion_tokens += resp.completion_tokens

        try:
            payload = llm.parse_entity_payload(resp.text, schema)
        except PayloadUnparseable as exc:
            logger.warning("chunk %d of %s unparseable: %s", chunk.chunk_index,
                           doc.doc_id, exc)
            result.chunk_status.append("payload_failed")
            continue
        result.parse_dropped += payload.dropped

        valid, rejected = validate_candidates(list(payload.entities), schema, chunk)
        for candidate, reason in rejected:
            result.filtered.append(_filtered_from(
                candidate, doc.doc_id, chunk.chunk_index, reason, "filtered_validation",
            ))

        if opts.reflection and valid:
            outcome = reflect(valid, chunk, backend, opts.reflection_thresholds,
                              model=model)
            result.prompt_tokens += outcome.prompt_tokens
            result.completion_tokens += outcome.completion_tokens
            scored_kept = outcome.kept
            for candidate, record in outcome.filtered:
                low = [
                    name for name, score, threshold in zip(
                        ("relevance", "accuracy", "consistency"),
                        record.values(), opts.reflection_thresholds,
                    )
                    if score < threshold
                ]
                result.filtered.append(_filtered_from(
                    candidate, doc.doc_id, chunk.chunk_index,
                    "low_" + "_".join(low), "filtered_reflection", record,
                ))
        else:
            scored_kept = [(c, None) for c in valid]

        kept_entities: list[ExtractedEntity] = []
        for candidate, reflection_record in scored_kept:
            final = _finalize_candidate(candidate, schema, memory, doc, geocoder, opts)
            if isinstance(final, str):  # rejection reason from post-processing
                result.filtered.append(_filtered_from(
                    candidate, doc.doc_id, chunk.chunk_index, final,
                    "filtered_validation", reflection_record,
                ))
                continue
            seq = len(kept_entities)
            kept_entities.append(ExtractedEntity(
                entity_id=f"{doc.doc_id}:{chunk.chunk_index}:{seq}",
                doc_id=doc.doc_id,
                chunk_index=chunk.chunk_index,
                dimension=candidate.dimension,
                surface=candidate.surface,
                doc_span=(chunk.char_start + candidate.span[0],
                          chunk.char_start + candidate.span[1]),
                value=final,
                confidence=candidate.confidence,
                reflection=reflection_record,
            ))
        memory.update(kept_entities)
        result.entities.extend(kept_entities)
        result.chunk_status.append("ok")

    result.entities, result.dedupe_removed = dedupe_overlap(result.entities)
    result.elapsed_ms = (_time.monotonic() - started) * 1000.0
    return result


def extract_corpus(
    docs: list[SourceDocument],
    schema: SchemaSet,
    backend,
    opts: ExtractOptions = ExtractOptions(),
    geocoder: GeocodingService | None = None,
    workers: int | None = None,
) -> list[ExtractionResult]:
    """Extract documents in parallel; results come back in input order."""
    if geocoder is None:
        geocoder = GeocodingService(load_default_gazetteer())
    if isinstance(backend, BackendSpec):
        model = backend.model
        shared = llm.make_backend(backend)
    else:
        shared = backend
    if workers is None:
        workers = min(4, os.cpu_count() or 1)
    workers = max(1, min(workers, len(docs) or 1))

    def run(doc: SourceDocument) -> ExtractionResult:
        local_opts = opts
        if isinstance(backend, BackendSpec):
            local_opts = replace(opts, model=model)
        return extract_document(doc, schema, shared, local_opts, geocoder)

    if workers == 1 or len(docs) <= 1:
        return [run(doc) for doc in docs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, docs))
