"""Schema-configurable spatiotemporal information extraction pipeline.

Turns unstructured documents into grounded multidimensional entity records
(temporal, spatial, categorical, structured) with document-level context
memory, reflection-based quality filtering, offline-capable geocoding with
context correction, built-in analytics, and an evaluation harness.
"""

from .analytics import (
    AnalyticsBundle,
    BurstWindow,
    CoocGraph,
    StCluster,
    StEvent,
    analyze,
    build_events,
    cluster_st,
    cooccurrence_graph,
    detect_bursts,
    dimension_breakdown,
)
from .engine import (
    CategoryValue,
    ExtractedEntity,
    ExtractionMemory,
    ExtractionResult,
    ExtractOptions,
    StructuredValue,
    dedupe_overlap,
    extract_corpus,
    extract_document,
    reflect,
    validate_candidates,
)
from .evaluation import (
    EvalReport,
    GoldRecord,
    combined_f1,
    evaluate_run,
    load_gold,
    match_temporal,
    mde,
    prf,
    spatial_fuzzy_match,
)
from .geo import (
    GeocodingService,
    GeoValue,
    Gazetteer,
    HttpGeocoder,
    haversine_km,
    load_default_gazetteer,
)
from .ingest import (
    Chunk,
    FetchPolicy,
    SourceDocument,
    chunk_document,
    compute_doc_id,
    load_document,
)
from .llm import (
    BackendSpec,
    CandidateEntity,
    CompletionRequest,
    CompletionResponse,
    PromptContext,
    RecordingBackend,
    ReplayBackend,
    RetryPolicy,
    complete,
    parse_entity_payload,
    render_extraction_prompt,
)
from .schema import (
    DimensionSchema,
    SchemaSet,
    default_schema,
    parse_schema,
    parse_schema_file,
    render_schema_instructions,
    serialize_schema,
)
from .store import (
    RunManifest,
    build_manifest,
    export_dashboard_bundle,
    read_run,
    stable_dumps,
    write_run,
)
from .temporal import (
    TemporalValue,
    parse_iso,
    resolve_relative,
    temporal_exact_match,
)

__version__ = "0.1.0"
