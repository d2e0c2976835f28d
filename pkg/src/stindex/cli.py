"""Command-line interface: extract, analyze, eval, export-dashboard,
schema-validate, and the fully offline demo pipeline.

Exit codes: 0 success, 1 user error (message on stderr), 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import traceback
from pathlib import Path

from . import llm
from .analytics import analyze
from .engine import ExtractOptions, extract_corpus
from .errors import StindexError
from .evaluation import evaluate_run, load_gold, render_report_table
from .geo import GeocodingService, HttpGeocoder, load_default_gazetteer
from .ingest import compute_doc_id, load_document
from .llm import BackendSpec
from .schema import default_schema, parse_schema_file
from .store import (
    analytics_payload,
    build_manifest,
    export_dashboard_bundle,
    read_run,
    stable_dumps,
    write_manifest,
    write_run,
)

DEMO_DIR = Path(__file__).parent / "data" / "demo"
DEMO_CHUNK_SIZE = 700
DEMO_CHUNK_OVERLAP = 100
DEMO_MODEL = "demo-model"


def _schema_from_args(args) -> object:
    if getattr(args, "config", None):
        return parse_schema_file(args.config)
    return default_schema()


def _geocoder_from_args(args) -> GeocodingService:
    import os

    gazetteer = load_default_gazetteer()
    mode = getattr(args, "geocoder", "offline")
    url = os.environ.get("STINDEX_GEOCODER_URL")
    if mode == "http" and url:
        return GeocodingService(gazetteer, http=HttpGeocoder(url))
    return GeocodingService(gazetteer)


def _backend_from_args(args) -> BackendSpec:
    import os

    if args.backend == "replay":
        if not args.fixtures:
            raise StindexError("--backend replay requires --fixtures")
        return BackendSpec(
            kind="replay_fixture",
            model=os.environ.get(llm.ENV_MODEL, DEMO_MODEL),
            fixture_path=args.fixtures,
        )
    return BackendSpec.from_env()


def _opts_from_args(args) -> ExtractOptions:
    threshold = args.reflection_threshold
    return ExtractOptions(
        chunk_strategy=args.chunk_strategy,
        chunk_size=args.chunk_size,
        chunk_overlap=args.chunk_overlap,
        reflection=not args.no_reflection,
        reflection_thresholds=(threshold, threshold, threshold),
        geo_context_correction=not args.no_geo_correction,
    )


def _load_inputs(paths: list[str]) -> list:
    docs = []
    for raw in paths:
        if raw == "-":
            docs.append(load_document(sys.stdin.read(), origin="raw_text"))
        else:
            docs.append(load_document(raw))
    return docs


def cmd_extract(args) -> int:
    schema = _schema_from_args(args)
    backend = _backend_from_args(args)
    geocoder = _geocoder_from_args(args)
    opts = _opts_from_args(args)
    docs = _load_inputs(args.input)
    results = extract_corpus(docs, schema, backend, opts, geocoder,
                             workers=args.workers)
    write_run(results, args.out)
    if args.manifest:
        manifest = build_manifest(
            schema,
            backend_spec={
                "kind": backend.kind,
                "model": backend.model,
                "base_url": backend.base_url,
                "fixture_path": backend.fixture_path,
                "auth_env": backend.auth_env,
            },
            corpus=[
                (doc.locator or "(raw text)",
                 hashlib.sha256(doc.body.encode("utf-8")).hexdigest())
                for doc in docs
            ],
            chunking={"strategy": opts.chunk_strategy, "size": opts.chunk_size,
                      "overlap": opts.chunk_overlap},
            reflection={"enabled": opts.reflection,
                        "thresholds": list(opts.reflection_thresholds)},
            geocoder="http" if getattr(args, "geocoder", "offline") == "http" else "offline",
        )
        write_manifest(manifest, args.manifest)
    kept = sum(len(r.entities) for r in results)
    print(f"extracted {kept} entities from {len(docs)} documents -> {args.out}")
    return 0


def _analytics_from_args(results, schema, args):
    return analyze(
        results, schema,
        eps_km=args.eps_km, eps_days=args.eps_days, min_pts=args.min_pts,
        window_days=args.window_days, step_days=args.step_days,
        z=args.z, min_count=args.min_count,
    )


def cmd_analyze(args) -> int:
    schema = _schema_from_args(args)
    results = read_run(args.run)
    analytics = _analytics_from_args(results, schema, args)
    Path(args.out).write_text(stable_dumps(analytics_payload(analytics)) + "\n",
                              encoding="utf-8")
    print(
        f"{len(analytics.events)} events, {len(analytics.clusters)} clusters,"
        f" {len(analytics.bursts)} bursts -> {args.out}"
    )
    return 0


def cmd_eval(args) -> int:
    schema = _schema_from_args(args)
    if not Path(args.gold).exists():
        raise StindexError(f"gold file not found: {args.gold}")
    results = read_run(args.pred)
    gold = load_gold(args.gold, schema)
    report = evaluate_run(results, gold, schema, tau=args.tau)
    print(render_report_table(report, schema))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_payload(), indent=2) + "\n", encoding="utf-8"
        )
    return 0


def cmd_export_dashboard(args) -> int:
    schema = _schema_from_args(args)
    results = read_run(args.run)
    analytics = _analytics_from_args(results, schema, args)
    digest = "unspecified"
    if args.manifest and Path(args.manifest).exists():
        digest = json.loads(Path(args.manifest).read_text())["run_id"]
    export_dashboard_bundle(results, schema, analytics, digest, args.out)
    print(f"dashboard bundle -> {args.out}")
    return 0


def cmd_schema_validate(args) -> int:
    schema = parse_schema_file(args.config)
    print(f"ok: {len(schema.dimensions)} dimensions"
          f" ({', '.join(schema.names)})")
    return 0


def load_demo_corpus() -> list:
    """Shipped fixture corpus with install-location-independent doc ids."""
    from dataclasses import replace as dc_replace

    docs = []
    for path in sorted((DEMO_DIR / "corpus").iterdir()):
        doc = load_document(str(path))
        rel = f"corpus/{path.name}"
        docs.append(dc_replace(doc, locator=rel,
                               doc_id=compute_doc_id("file", rel, doc.body)))
    return docs


def demo_options(reflection: bool = True) -> ExtractOptions:
    return ExtractOptions(
        chunk_size=DEMO_CHUNK_SIZE,
        chunk_overlap=DEMO_CHUNK_OVERLAP,
        reflection=reflection,
        model=DEMO_MODEL,
    )


def cmd_demo(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = parse_schema_file(DEMO_DIR / "schema.yaml")
    backend = BackendSpec(
        kind="replay_fixture", model=DEMO_MODEL,
        fixture_path=str(DEMO_DIR / "replay_fixtures.json"),
    )
    geocoder = GeocodingService(load_default_gazetteer())
    docs = load_demo_corpus()
    opts = demo_options(reflection=not args.no_reflection)
    results = extract_corpus(docs, schema, backend, opts, geocoder)

    write_run(results, out_dir / "run.jsonl")
    manifest = build_manifest(
        schema,
        backend_spec={"kind": backend.kind, "model": backend.model,
                      "fixture_path": "data/demo/replay_fixtures.json",
                      "auth_env": backend.auth_env},
        corpus=[
            (doc.locator, hashlib.sha256(doc.body.encode("utf-8")).hexdigest())
            for doc in docs
        ],
        chunking={"strategy": opts.chunk_strategy, "size": opts.chunk_size,
                  "overlap": opts.chunk_overlap},
        reflection={"enabled": opts.reflection,
                    "thresholds": list(opts.reflection_thresholds)},
        geocoder="offline",
    )
    write_manifest(manifest, out_dir / "manifest.json")

    analytics = analyze(results, schema)
    Path(out_dir / "analytics.json").write_text(
        stable_dumps(analytics_payload(analytics)) + "\n", encoding="utf-8"
    )
    export_dashboard_bundle(results, schema, analytics, manifest.run_id,
                            out_dir / "bundle.json")

    gold = load_gold(DEMO_DIR / "gold.jsonl", schema)
    report = evaluate_run(results, gold, schema)
    Path(out_dir / "report.json").write_text(
        json.dumps(report.to_payload(), indent=2) + "\n", encoding="utf-8"
    )
    print(render_report_table(report, schema, label="demo"))
    kept = sum(len(r.entities) for r in results)
    print(
        f"\ndemo: {len(docs)} documents, "
        f"{sum(len(r.chunk_status) for r in results)} chunks, {kept} entities, "
        f"{len(analytics.clusters)} clusters, {len(analytics.bursts)} bursts"
    )
    print(f"outputs in {out_dir}/ (run.jsonl, manifest.json, analytics.json, "
          f"bundle.json, report.json)")
    return 0


def _add_analytics_params(parser) -> None:
    parser.add_argument("--eps-km", type=float, default=50.0)
    parser.add_argument("--eps-days", type=float, default=7.0)
    parser.add_argument("--min-pts", type=int, default=2)
    parser.add_argument("--window-days", type=int, default=7)
    parser.add_argument("--step-days", type=int, default=1)
    parser.add_argument("--z", type=float, default=2.0)
    parser.add_argument("--min-count", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stindex",
        description="Schema-configurable spatiotemporal information extraction",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract", help="run extraction over documents")
    p.add_argument("--config", help="schema config file (JSON/YAML)")
    p.add_argument("--input", action="append", required=True,
                   help="file path, URL, or '-' for stdin (repeatable)")
    p.add_argument("--backend", choices=["http", "replay"], default="http")
    p.add_argument("--fixtures", help="replay fixture file")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="also write a run manifest here")
    p.add_argument("--no-reflection", action="store_true")
    p.add_argument("--reflection-threshold", type=float, default=0.7)
    p.add_argument("--chunk-size", type=int, default=2000)
    p.add_argument("--chunk-overlap", type=int, default=200)
    p.add_argument("--chunk-strategy", default="sliding_window",
                   choices=["sliding_window", "paragraph", "element", "semantic"])
    p.add_argument("--geocoder", choices=["http", "offline"], default="offline")
    p.add_argument("--no-geo-correction", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="compute analytics over a run")
    p.add_argument("--config", help="schema config file")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    _add_analytics_params(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="score a run against gold annotations")
    p.add_argument("--config", help="schema config file")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-dashboard", help="write the dashboard bundle")
    p.add_argument("--config", help="schema config file")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="manifest whose run_id to embed")
    _add_analytics_params(p)
    p.set_defaults(func=cmd_export_dashboard)

    p = sub.add_parser("schema-validate", help="check a schema config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_schema_validate)

    p = sub.add_parser("demo", help="run the shipped offline fixture pipeline")
    p.add_argument("--out", default="stindex-demo")
    p.add_argument("--no-reflection", action="store_true")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return 0 if exc.code == 0 else 1
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (StindexError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
