"""Run persistence and dashboard bundle export.

Runs are JSON-lines: one header line per document followed by one record
per entity (kept and filtered). Bundles are a single self-contained JSON
document with sorted keys and fixed 6-decimal float formatting so identical
inputs always produce identical bytes; the structure is pinned by the
committed bundle.schema.json.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import jsonschema

from .analytics import AnalyticsBundle
from .engine import ExtractedEntity, ExtractionResult, FilteredEntity
from .errors import FormatError
from .schema import SchemaSet, schema_to_dict

BUNDLE_VERSION = 1
BUNDLE_SCHEMA_PATH = Path(__file__).parent / "data" / "bundle.schema.json"


# -- deterministic JSON ------------------------------------------------------


def _format_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot serialize non-finite float {value!r}")
    if value == 0.0:
        value = 0.0  # normalize -0.0
    return f"{value:.6f}"


def stable_dumps(obj) -> str:
    """JSON with sorted keys and floats fixed at 6 decimals (byte-stable)."""
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(stable_dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ",".join(
            json.dumps(str(k), ensure_ascii=False) + ":" + stable_dumps(v)
            for k, v in items
        ) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- run files ---------------------------------------------------------------


def _doc_header(result: ExtractionResult) -> dict:
    return {
        "type": "doc",
        "doc_id": result.doc_id,
        "chunk_status": list(result.chunk_status),
        "prompt_tokens": result.prompt_tokens,
        "completion_tokens": result.completion_tokens,
        "parse_dropped": result.parse_dropped,
        "dedupe_removed": result.dedupe_removed,
    }


def write_run(results: list[ExtractionResult], path: str | Path) -> None:
    """One doc header plus one line per entity; wall-clock timing is not
    persisted so replay re-runs are byte-identical."""
    lines = []
    for result in results:
        lines.append(json.dumps(_doc_header(result), ensure_ascii=False,
                                separators=(",", ":")))
        for entity in result.entities:
            record = {"type": "entity", **entity.to_payload()}
            lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
        for filtered in result.filtered:
            record = {"type": "filtered", **filtered.to_payload()}
            lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_run(path: str | Path) -> list[ExtractionResult]:
    results: list[ExtractionResult] = []
    current: ExtractionResult | None = None
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", i) from exc
        kind = record.get("type")
        if kind == "doc":
            current = ExtractionResult(
                doc_id=record["doc_id"],
                chunk_status=list(record.get("chunk_status", [])),
                prompt_tokens=record.get("prompt_tokens", 0),
                completion_tokens=record.get("completion_tokens", 0),
                parse_dropped=record.get("parse_dropped", 0),
                dedupe_removed=record.get("dedupe_removed", 0),
            )
            results.append(current)
        elif kind == "entity":
            if current is None:
                raise FormatError("entity record before any doc header", i)
            try:
                current.entities.append(ExtractedEntity.from_payload(record))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad entity record: {exc}", i) from exc
        elif kind == "filtered":
            if current is None:
                raise FormatError("filtered record before any doc header", i)
            try:
                current.filtered.append(FilteredEntity.from_payload(record))
            except (KeyError, ValueError, TypeError) as exc:
                raise FormatError(f"bad filtered record: {exc}", i) from exc
        else:
            raise FormatError(f"unknown record type {kind!r}", i)
    return results


# -- run manifest --------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    schema_version: str
    schema_sha256: str
    backend: dict
    corpus: tuple[dict, ...]
    chunking: dict
    reflection: dict
    geocoder: str
    tool_versions: dict
    created_at: str  # informational; excluded from the digest

    def core(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "schema_sha256": self.schema_sha256,
            "backend": self.backend,
            "corpus": list(self.corpus),
            "chunking": self.chunking,
            "reflection": self.reflection,
            "geocoder": self.geocoder,
        }

    def to_payload(self) -> dict:
        return {
            "run_id": self.run_id,
            **self.core(),
            "tool_versions": self.tool_versions,
            "created_at": self.created_at,
        }


def _package_version() -> str:
    try:
        return metadata.version("stindex")
    except metadata.PackageNotFoundError:
        return "unknown"


def build_manifest(
    schema: SchemaSet,
    backend_spec: dict,
    corpus: list[tuple[str, str]],  # (locator, content sha256)
    chunking: dict,
    reflection: dict,
    geocoder: str,
) -> RunManifest:
    """Assemble the run manifest; secrets never enter it (backends carry the
    auth env var NAME only) and run_id hashes the deterministic core."""
    core = {
        "schema_version": schema.version,
        "schema_sha256": schema.sha256(),
        "backend": backend_spec,
        "corpus": [{"locator": loc, "sha256": digest} for loc, digest in corpus],
        "chunking": chunking,
        "reflection": reflection,
        "geocoder": geocoder,
    }
    run_id = hashlib.sha256(stable_dumps(core).encode("utf-8")).hexdigest()[:16]
    return RunManifest(
        run_id=run_id,
        schema_version=core["schema_version"],
        schema_sha256=core["schema_sha256"],
        backend=backend_spec,
        corpus=tuple(core["corpus"]),
        chunking=chunking,
        reflection=reflection,
        geocoder=geocoder,
        tool_versions={
            "python": platform.python_version(),
            "stindex": _package_version(),
        },
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_payload(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


# -- dashboard bundle -----------------------------------------------------------


def analytics_payload(analytics: AnalyticsBundle) -> dict:
    return {
        "events": [
            {
                "event_id": e.event_id,
                "doc_id": e.doc_id,
                "chunk_index": e.chunk_index,
                "date": e.date.isoformat(),
                "iso": e.temporal.serialize(),
                "lat": e.lat,
                "lon": e.lon,
                "place": e.geo.resolved_name or e.geo.name,
                "linked": [
                    {"dimension": d, "value": v, "entity_id": eid}
                    for d, v, eid in e.linked
                ],
                "temporal_entity_id": e.temporal_entity_id,
                "spatial_entity_id": e.spatial_entity_id,
            }
            for e in analytics.events
        ],
        "excluded_entity_count": analytics.excluded_entities,
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "member_event_ids": list(c.member_event_ids),
                "centroid_lat": c.centroid_lat,
                "centroid_lon": c.centroid_lon,
                "start": c.start.isoformat(),
                "end": c.end.isoformat(),
                "size": c.size,
            }
            for c in analytics.clusters
        ],
        "noise_event_ids": list(analytics.noise_event_ids),
        "bursts": [
            {
                "start": b.start.isoformat(),
                "end": b.end.isoformat(),
                "observed": b.observed,
                "baseline_mean": b.baseline_mean,
                "baseline_std": b.baseline_std,
                "z_score": b.z_score,
            }
            for b in analytics.bursts
        ],
        "cooccurrence": {
            "nodes": [
                {
                    "id": n.node_id,
                    "dimension": n.dimension,
                    "value": n.value,
                    "frequency": n.frequency,
                }
                for n in analytics.graph.nodes
            ],
            "edges": [
                {"source": e.source, "target": e.target, "weight": e.weight}
                for e in analytics.graph.edges
            ],
        },
        "dimension_breakdown": [
            {
                "dimension": row.dimension,
                "total": row.total,
                "values": [{"value": v, "count": c} for v, c in row.values],
            }
            for row in analytics.breakdown
        ],
    }


def assemble_bundle(
    results: list[ExtractionResult],
    schema: SchemaSet,
    analytics: AnalyticsBundle,
    manifest_digest: str,
) -> dict:
    entities = [e.to_payload() for r in results for e in r.entities]
    return {
        "bundle_version": BUNDLE_VERSION,
        "manifest_digest": manifest_digest,
        "schema": schema_to_dict(schema),
        "entities": entities,
        "stats": {
            "documents": len(results),
            "chunks": sum(len(r.chunk_status) for r in results),
            "entities": len(entities),
            "filtered": sum(len(r.filtered) for r in results),
        },
        **analytics_payload(analytics),
    }


def load_bundle_schema() -> dict:
    return json.loads(BUNDLE_SCHEMA_PATH.read_text(encoding="utf-8"))


def export_dashboard_bundle(
    results: list[ExtractionResult],
    schema: SchemaSet,
    analytics: AnalyticsBundle,
    manifest_digest: str,
    path: str | Path,
) -> dict:
    """Write the self-contained dashboard bundle; validates against the
    committed schema and is byte-stable for identical inputs."""
    bundle = assemble_bundle(results, schema, analytics, manifest_digest)
    jsonschema.validate(bundle, load_bundle_schema())
    Path(path).write_text(stable_dumps(bundle) + "\n", encoding="utf-8")
    return bundle
