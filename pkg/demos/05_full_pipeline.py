#!/usr/bin/env python3
"""The full pipeline, end to end and fully offline.

Runs the shipped fixture corpus through extraction (replay backend),
analytics, bundle export, and evaluation against the committed gold
annotations. This is the same path as `stindex demo`, driven through the
library API. Everything it needs ships with the package.
"""

import tempfile
from pathlib import Path

from stindex import BackendSpec, GeocodingService, evaluate_run, extract_corpus, load_default_gazetteer, load_gold
from stindex.analytics import analyze
from stindex.cli import DEMO_DIR, demo_options, load_demo_corpus
from stindex.evaluation import render_report_table
from stindex.schema import parse_schema_file
from stindex.store import export_dashboard_bundle

schema = parse_schema_file(DEMO_DIR / "schema.yaml")
docs = load_demo_corpus()
backend = BackendSpec(kind="replay_fixture", model="demo-model",
                      fixture_path=str(DEMO_DIR / "replay_fixtures.json"))
geocoder = GeocodingService(load_default_gazetteer())

results = extract_corpus(docs, schema, backend, demo_options(), geocoder)
kept = sum(len(r.entities) for r in results)
filtered = sum(len(r.filtered) for r in results)
print(f"extracted {kept} entities ({filtered} filtered) "
      f"from {len(docs)} documents")

analytics = analyze(results, schema)
print(f"analytics: {len(analytics.events)} events, "
      f"{len(analytics.clusters)} clusters, {len(analytics.bursts)} bursts, "
      f"{len(analytics.graph.nodes)} graph nodes")

with tempfile.TemporaryDirectory() as tmp:
    bundle_path = Path(tmp) / "bundle.json"
    export_dashboard_bundle(results, schema, analytics, "walkthrough", bundle_path)
    print(f"dashboard bundle: {bundle_path.stat().st_size} bytes, schema-valid")

report = evaluate_run(results, load_gold(DEMO_DIR / "gold.jsonl", schema), schema)
print()
print(render_report_table(report, schema, label="demo"))
