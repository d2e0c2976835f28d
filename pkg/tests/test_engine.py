import json
from collections import deque
from datetime import date

import pytest

from stindex.engine import (
    CategoryValue,
    ExtractedEntity,
    ExtractionMemory,
    ExtractOptions,
    StructuredValue,
    dedupe_overlap,
    extract_corpus,
    extract_document,
    reflect,
    validate_candidates,
)
from stindex.geo import GeocodingService, load_default_gazetteer
from stindex.ingest import Chunk, SourceDocument, chunk_document
from stindex.llm import CandidateEntity, CompletionResponse
from stindex.schema import parse_schema
from stindex.temporal import TemporalValue, parse_iso

SCHEMA = parse_schema(
    """
dimensions:
  - name: temporal
    kind: normalized_temporal
  - name: spatial
    kind: geocoded_spatial
    hierarchy: [country, admin, locality]
  - name: disease
    kind: categorical
    vocabulary: [measles, influenza]
"""
)


@pytest.fixture(scope="module")
def geocoder():
    return GeocodingService(load_default_gazetteer())


class QueueBackend:
    """Returns scripted responses in call order; Exception items are raised."""

    def __init__(self, responses):
        self.responses = deque(responses)

    def complete(self, req):
        item = self.responses.popleft()
        if isinstance(item, Exception):
            raise item
        return CompletionResponse(text=item)


def payload_for(chunk: Chunk, table: dict) -> str:
    """Build a response JSON for a chunk; spans located via text search."""
    payload = {}
    for dimension, items in table.items():
        rows = []
        for item in items:
            surface, value = item[0], item[1]
            confidence = item[2] if len(item) > 2 else 0.9
            start = chunk.text.index(surface)
            row = {
                "text": surface,
                "span": [start, start + len(surface)],
                "value": value,
                "confidence": confidence,
            }
            if len(item) > 3 and item[3]:
                row["qualifier"] = item[3]
            rows.append(row)
        payload[dimension] = rows
    return json.dumps(payload)


def scores_payload(triples) -> str:
    return json.dumps({
        "scores": [
            {"index": i, "relevance": r, "accuracy": a, "consistency": c}
            for i, (r, a, c) in enumerate(triples)
        ]
    })


def make_doc(body: str, pub_date: date | None = None, doc_id: str = "doc") -> SourceDocument:
    return SourceDocument(
        doc_id=doc_id, origin="raw_text", locator="", body=body, pub_date=pub_date
    )


NO_REFLECTION = ExtractOptions(
    chunk_size=120, chunk_overlap=20, reflection=False, model="test-model"
)


class TestRelativeTemporalAcrossChunks:
    def test_next_day_resolved_via_memory_anchor(self, geocoder):
        body = (
            "The first case was confirmed on March 15, 2024 in the city of Perth "
            "according to officials. "
            + "Updates followed steadily. " * 2
            + "Cases rose again the next day as clinics reported new infections."
        )
        doc = make_doc(body)
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        assert len(chunks) >= 2
        assert "March 15, 2024" in chunks[0].text
        relative_chunk = next(c for c in chunks if "the next day" in c.text)
        assert relative_chunk.chunk_index > 0

        responses = []
        for chunk in chunks:
            if chunk.chunk_index == 0:
                responses.append(payload_for(chunk, {
                    "temporal": [("March 15, 2024", "2024-03-15")],
                    "spatial": [("Perth", "Perth")],
                }))
            elif chunk is relative_chunk:
                responses.append(payload_for(chunk, {
                    "temporal": [("the next day", None)],
                }))
            else:
                responses.append("{}")
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        temporals = [e for e in result.entities if e.dimension == "temporal"]
        assert [t.canonical_value() for t in temporals] == ["2024-03-15", "2024-03-16"]
        assert temporals[1].value.relative is True
        assert all(s == "ok" for s in result.chunk_status)

    def test_resolver_overrides_wrong_model_value(self, geocoder):
        body = (
            "Officials confirmed the index case on March 15, 2024 in Perth. "
            + "More detail arrived over time. " * 2
            + "A second exposure occurred the next day at the airport there."
        )
        doc = make_doc(body)
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        relative_chunk = next(c for c in chunks if "the next day" in c.text)
        responses = []
        for chunk in chunks:
            if chunk.chunk_index == 0:
                responses.append(payload_for(chunk, {
                    "temporal": [("March 15, 2024", "2024-03-15")],
                }))
            elif chunk is relative_chunk:
                # model guesses the wrong absolute date; resolver wins
                responses.append(payload_for(chunk, {
                    "temporal": [("the next day", "2024-03-20")],
                }))
            else:
                responses.append("{}")
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        values = [e.canonical_value() for e in result.entities]
        assert "2024-03-16" in values
        assert "2024-03-20" not in values

    def test_pub_date_fallback_anchor(self, geocoder):
        doc = make_doc(
            "Two new cases were reported yesterday at the local hospital.",
            pub_date=date(2024, 4, 10),
        )
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        responses = [payload_for(chunks[0], {"temporal": [("yesterday", None)]})]
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        assert result.entities[0].canonical_value() == "2024-04-09"

    def test_unresolvable_relative_without_anchor_is_filtered(self, geocoder):
        doc = make_doc("Cases rose the next day across the region.")
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        responses = [payload_for(chunks[0], {"temporal": [("the next day", None)]})]
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        assert result.entities == []
        assert result.filtered[0].reason == "unresolved_relative"
        assert result.filtered[0].provenance == "filtered_validation"


class TestChunkFailureIsolation:
    def test_payload_failure_does_not_abort_document(self, geocoder):
        body = " ".join(f"Sentence number {i} talks about the outbreak." for i in range(30))
        doc = make_doc(body)
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        assert len(chunks) >= 5
        responses = []
        for chunk in chunks:
            if chunk.chunk_index == 2:
                responses.append("I cannot extract anything.")
            else:
                responses.append("{}")
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        assert result.chunk_status[2] == "payload_failed"
        assert result.chunk_status.count("ok") == len(chunks) - 1

    def test_backend_failure_marks_chunk(self, geocoder):
        from stindex.errors import BackendUnavailable

        body = " ".join(f"Sentence number {i} about cases." for i in range(30))
        doc = make_doc(body)
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        responses = ["{}"] * len(chunks)
        responses[1] = BackendUnavailable("down")
        result = extract_document(doc, SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        assert result.chunk_status[1] == "backend_failed"

    def test_empty_response_empty_result(self, geocoder):
        doc = make_doc("Nothing notable is stated here at all.")
        result = extract_document(
            doc, SCHEMA,
            QueueBackend(['{"temporal": [], "spatial": [], "disease": []}']),
            NO_REFLECTION, geocoder,
        )
        assert result.entities == []
        assert result.chunk_status == ["ok"]


class TestValidateCandidates:
    CHUNK = Chunk(doc_id="d", chunk_index=0, char_start=0, char_end=2000,
                  text="x" * 2000, strategy="sliding_window")

    def cand(self, dimension, surface, value, span=(0, 5)):
        return CandidateEntity(dimension=dimension, surface=surface, span=span,
                               value=value, confidence=0.9)

    def test_bad_iso_rejected(self):
        valid, rejected = validate_candidates(
            [self.cand("temporal", "last month of 2024", "2024-13-01")],
            SCHEMA, self.CHUNK,
        )
        assert valid == []
        assert rejected[0][1] == "bad_iso"

    def test_relative_expression_passes_without_value(self):
        valid, rejected = validate_candidates(
            [self.cand("temporal", "the next day", None)], SCHEMA, self.CHUNK,
        )
        assert len(valid) == 1

    def test_label_case_folded(self):
        valid, _ = validate_candidates(
            [self.cand("disease", "Measles", "Measles")], SCHEMA, self.CHUNK,
        )
        assert len(valid) == 1

    def test_unknown_label_rejected(self):
        _, rejected = validate_candidates(
            [self.cand("disease", "dengue", "dengue")], SCHEMA, self.CHUNK,
        )
        assert rejected[0][1] == "bad_label"

    def test_span_outside_chunk(self):
        _, rejected = validate_candidates(
            [self.cand("temporal", "x", "2024-01-01", span=(1900, 2100))],
            SCHEMA, self.CHUNK,
        )
        assert rejected[0][1] == "bad_span"

    def test_structured_missing_attribute(self):
        schema = parse_schema(
            """
dimensions:
  - name: temporal
    kind: normalized_temporal
  - name: spatial
    kind: geocoded_spatial
  - name: venue
    kind: structured
    attributes:
      - venue_name: text
      - capacity: number
"""
        )
        _, rejected = validate_candidates(
            [self.cand("venue", "stadium", {"venue_name": "Optus Stadium"})],
            schema, self.CHUNK,
        )
        assert rejected[0][1] == "missing_attribute"
        _, rejected = validate_candidates(
            [self.cand("venue", "stadium",
                       {"venue_name": "Optus Stadium", "capacity": "lots"})],
            schema, self.CHUNK,
        )
        assert rejected[0][1] == "bad_attribute_type"


REFLECT_CHUNK = Chunk(doc_id="d", chunk_index=0, char_start=0, char_end=60,
                      text="A measles case was confirmed in Perth on March 15, 2024.",
                      strategy="sliding_window")

REFLECT_CANDIDATES = [
    CandidateEntity("temporal", "March 15, 2024", (42, 56), "2024-03-15", 0.9),
    CandidateEntity("spatial", "Perth", (33, 38), "Perth", 0.85),
    CandidateEntity("disease", "measles", (2, 9), "measles", 0.8),
]


class TestReflect:
    def test_conjunction_rule(self):
        backend = QueueBackend([scores_payload([
            (0.9, 0.8, 0.6),   # consistency fails
            (0.7, 0.7, 0.7),   # inclusive boundary: kept
            (0.69, 0.9, 0.9),  # relevance fails
        ])])
        outcome = reflect(REFLECT_CANDIDATES, REFLECT_CHUNK, backend,
                          (0.7, 0.7, 0.7), model="m")
        kept_surfaces = [c.surface for c, _ in outcome.kept]
        filtered_surfaces = [c.surface for c, _ in outcome.filtered]
        assert kept_surfaces == ["Perth"]
        assert filtered_surfaces == ["March 15, 2024", "measles"]
        assert outcome.kept[0][1] == {
            "relevance": 0.7, "accuracy": 0.7, "consistency": 0.7,
        }

    def test_zero_thresholds_keep_all(self):
        backend = QueueBackend([scores_payload([
            (0.1, 0.1, 0.1), (0.0, 0.0, 0.0), (0.5, 0.5, 0.5),
        ])])
        outcome = reflect(REFLECT_CANDIDATES, REFLECT_CHUNK, backend,
                          (0.0, 0.0, 0.0), model="m")
        assert len(outcome.kept) == 3

    def test_fail_open_on_unparseable(self):
        backend = QueueBackend(["no json here"])
        outcome = reflect(REFLECT_CANDIDATES, REFLECT_CHUNK, backend, model="m")
        assert len(outcome.kept) == 3
        assert outcome.failed
        assert all(record is None for _, record in outcome.kept)

    def test_fail_open_on_backend_error(self):
        from stindex.errors import BackendUnavailable

        backend = QueueBackend([BackendUnavailable("down")])
        outcome = reflect(REFLECT_CANDIDATES, REFLECT_CHUNK, backend, model="m")
        assert len(outcome.kept) == 3 and outcome.failed

    def test_unscored_candidate_kept(self):
        backend = QueueBackend([json.dumps({"scores": [
            {"index": 0, "relevance": 0.9, "accuracy": 0.9, "consistency": 0.9},
        ]})])
        outcome = reflect(REFLECT_CANDIDATES, REFLECT_CHUNK, backend, model="m")
        assert len(outcome.kept) == 3


def entity(dimension, value, doc_span, chunk_index, confidence=0.9, eid=None):
    return ExtractedEntity(
        entity_id=eid or f"doc:{chunk_index}:{doc_span[0]}",
        doc_id="doc",
        chunk_index=chunk_index,
        dimension=dimension,
        surface="s",
        doc_span=doc_span,
        value=value,
        confidence=confidence,
    )


class TestDedupeOverlap:
    def test_overlap_duplicate_earlier_chunk_survives(self):
        v = parse_iso("2024-03-15")
        a = entity("temporal", v, (1850, 1860), 0, confidence=0.8)
        b = entity("temporal", v, (1850, 1860), 1, confidence=0.95)
        survivors, removed = dedupe_overlap([a, b])
        assert removed == 1
        assert survivors[0].chunk_index == 0
        assert survivors[0].confidence == 0.95  # max of the pair

    def test_disjoint_mentions_both_kept(self):
        v = parse_iso("2024-03-15")
        a = entity("temporal", v, (0, 10), 0)
        b = entity("temporal", v, (500, 510), 1)
        survivors, removed = dedupe_overlap([a, b])
        assert removed == 0 and len(survivors) == 2

    def test_different_dimensions_same_span_kept(self):
        a = entity("temporal", parse_iso("2024-03-15"), (0, 10), 0)
        b = entity("disease", CategoryValue("measles"), (0, 10), 0)
        survivors, removed = dedupe_overlap([a, b])
        assert removed == 0 and len(survivors) == 2

    def test_different_values_same_span_kept(self):
        a = entity("temporal", parse_iso("2024-03-15"), (0, 10), 0)
        b = entity("temporal", parse_iso("2024-03-16"), (0, 10), 0)
        survivors, removed = dedupe_overlap([a, b])
        assert len(survivors) == 2


class TestGeoContextInEngine:
    BODY = (
        "Health officials in Perth and Fremantle issued an alert after several "
        "exposures were confirmed across the metropolitan area last week. "
        "Residents across WA were urged to check their vaccination status."
    )

    def _run(self, geocoder, correction: bool):
        doc = make_doc(self.BODY)
        opts = ExtractOptions(chunk_size=140, chunk_overlap=20, reflection=False,
                              geo_context_correction=correction, model="m")
        chunks = chunk_document(doc, "sliding_window", 140, 20)
        wa_chunk = next(c for c in chunks if "WA" in c.text)
        assert wa_chunk.chunk_index > 0
        responses = []
        for chunk in chunks:
            if chunk.chunk_index == 0:
                responses.append(payload_for(chunk, {
                    "spatial": [("Perth", "Perth"), ("Fremantle", "Fremantle")],
                }))
            elif chunk is wa_chunk:
                responses.append(payload_for(chunk, {"spatial": [("WA", "WA")]}))
            else:
                responses.append("{}")
        result = extract_document(doc, SCHEMA, QueueBackend(responses), opts, geocoder)
        return next(e for e in result.entities if e.surface == "WA")

    def test_majority_australia_resolves_western_australia(self, geocoder):
        wa = self._run(geocoder, correction=True)
        assert wa.value.resolved_name == "Western Australia"
        assert wa.value.hierarchy["country"] == "AU"

    def test_correction_disabled_gives_unbiased_tiebreak(self, geocoder):
        wa = self._run(geocoder, correction=False)
        assert wa.value.resolved_name == "Washington"
        assert wa.value.hierarchy["country"] == "US"


class TestStructuredDimension:
    SCHEMA = parse_schema(
        """
dimensions:
  - name: temporal
    kind: normalized_temporal
  - name: spatial
    kind: geocoded_spatial
  - name: venue
    kind: structured
    attributes:
      - venue_name: text
      - capacity: number
"""
    )

    def test_attributes_coerced(self, geocoder):
        doc = make_doc("The event at Optus Stadium drew a crowd of 60000 people.")
        chunks = chunk_document(doc, "sliding_window", 120, 20)
        responses = [payload_for(chunks[0], {
            "venue": [("Optus Stadium",
                       {"venue_name": "Optus Stadium", "capacity": "60000"})],
        })]
        result = extract_document(doc, self.SCHEMA, QueueBackend(responses),
                                  NO_REFLECTION, geocoder)
        assert result.entities[0].value == StructuredValue(
            attributes=(("capacity", 60000), ("venue_name", "Optus Stadium"))
        )


class TestMemory:
    def test_ring_buffer_eviction(self):
        memory = ExtractionMemory(SCHEMA, k=3)
        for i in range(5):
            memory.update([entity("disease", CategoryValue(f"label{i}"), (i, i + 1), 0,
                                  eid=f"e{i}")])
        lines = memory.memory_lines()
        assert len(lines) == 3
        assert "label2" in lines[0] and "label4" in lines[-1]

    def test_relative_values_never_anchor(self):
        memory = ExtractionMemory(SCHEMA)
        relative = TemporalValue(
            kind="instant", start=parse_iso("2024-03-16").start,
            granularity="day", relative=True,
        )
        memory.update([entity("temporal", relative, (0, 5), 0)])
        assert memory.temporal_anchor is None

    def test_instruction_lines_reflect_majority(self, geocoder):
        memory = ExtractionMemory(SCHEMA)
        perth = geocoder.geocode("Perth", bias="AU")
        freo = geocoder.geocode("Fremantle")
        memory.update([
            entity("spatial", perth, (0, 5), 0, eid="a"),
            entity("spatial", freo, (6, 15), 0, eid="b"),
        ])
        lines = memory.instruction_lines()
        assert any("Western Australia, AU" in l for l in lines)
        assert any("within AU" in l for l in lines)


class TestExtractCorpus:
    class RouterBackend:
        """Thread-safe: routes on the chunk text inside the request."""

        def __init__(self, table):
            self.table = table

        def complete(self, req):
            text = req.user.split("## Text\n", 1)[1].split("\n\n## Output format", 1)[0]
            for marker, response in self.table.items():
                if marker in text:
                    return CompletionResponse(text=response)
            return CompletionResponse(text="{}")

    def test_parallel_results_in_input_order(self, geocoder):
        docs = [
            make_doc(f"Document {i} mentions Perth prominently.", doc_id=f"d{i}")
            for i in range(3)
        ]
        chunks = {
            doc.doc_id: chunk_document(doc, "sliding_window", 120, 20)[0]
            for doc in docs
        }
        table = {
            f"Document {i}": payload_for(chunks[f"d{i}"], {"spatial": [("Perth", "Perth")]})
            for i in range(3)
        }
        backend = self.RouterBackend(table)
        results = extract_corpus(docs, SCHEMA, backend, NO_REFLECTION, geocoder,
                                 workers=2)
        assert [r.doc_id for r in results] == ["d0", "d1", "d2"]
        assert all(len(r.entities) == 1 for r in results)
