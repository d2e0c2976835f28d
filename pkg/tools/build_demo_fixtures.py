#!/usr/bin/env python3
"""Regenerate the demo replay fixtures and gold annotations.

The response tables below script what the recorded model says for every
(document, chunk) of the shipped corpus, including deliberate mistakes
(hallucinated dates, a mislabelled event, an invalid ISO value, an
out-of-vocabulary label, a fictional place) so the evaluation report has a
real error structure. The gold tables are the reference annotations.

The script runs the real pipeline against these tables with a recording
backend, once with reflection enabled and once without, and writes the
merged request-key -> response map plus gold.jsonl. Run from the repo root:

    python3 tools/build_demo_fixtures.py
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from stindex.cli import DEMO_CHUNK_OVERLAP, DEMO_CHUNK_SIZE, DEMO_DIR, load_demo_corpus
from stindex.engine import extract_document
from stindex.geo import GeocodingService, load_default_gazetteer
from stindex.ingest import chunk_document
from stindex.llm import EXTRACTION_SYSTEM, RecordingBackend
from stindex.schema import parse_schema_file

OK = (0.9, 0.85, 0.9)  # default reflection scores: comfortably kept


def T(surface, value, conf=0.9, scores=OK, invalid=False):
    return dict(dim="temporal", surface=surface, value=value, conf=conf,
                scores=scores, invalid=invalid)


def S(surface, value, conf=0.9, scores=OK, invalid=False):
    return dict(dim="spatial", surface=surface, value=value, conf=conf,
                scores=scores, invalid=invalid)


def D(surface, value, conf=0.9, scores=OK, invalid=False):
    return dict(dim="disease", surface=surface, value=value, conf=conf,
                scores=scores, invalid=invalid)


def E(surface, value, conf=0.9, scores=OK, invalid=False):
    return dict(dim="event_type", surface=surface, value=value, conf=conf,
                scores=scores, invalid=invalid)


def V(surface, value, conf=0.9, scores=OK, invalid=False):
    return dict(dim="venue_type", surface=surface, value=value, conf=conf,
                scores=scores, invalid=invalid)


# What the recorded model returns, per document and chunk.
SCRIPT = {
    "01-perth-measles-alert.txt": {
        0: [T("12 March 2024", "2024-03-12", 0.95),
            S("Perth", "Perth", 0.95), S("Fremantle", "Fremantle", 0.9),
            D("measles", "measles"), E("exposure event", "exposure", 0.85),
            V("airport", "airport"), V("restaurant", "restaurant", 0.85)],
        1: [T("the next day", None, 0.8),
            S("WA", "WA", 0.8), V("hospital", "hospital")],
    },
    "02-fremantle-cluster.md": {
        0: [T("yesterday", None, 0.85),  # resolves against the front-matter date
            S("Fremantle", "Fremantle"), D("measles", "measles"),
            E("outbreak", "outbreak")],
        # the model misses the "22 March" notification (gold FN) and
        # over-extracts the incidental influenza mention (gold FP)
        1: [T("21 March 2024", "2024-03-21"),
            S("Rockingham", "Rockingham"), V("primary school", "school", 0.85),
            D("influenza", "influenza", 0.7)],
    },
    "03-great-southern-advisory.txt": {
        # "5 April 2024" sits in the chunk overlap and is extracted twice;
        # dedupe keeps the chunk-0 copy with the max confidence (0.95)
        0: [T("29 March 2024", "2024-03-29"), T("5 April 2024", "2024-04-05", 0.9),
            S("Albany", "Albany", 0.85), D("whooping cough", "whooping cough"),
            D("covid", "covid", 0.6, invalid=True),  # outside the vocabulary
            E("advisory", "advisory")],
        1: [T("5 April 2024", "2024-04-05", 0.95),
            T("someday soon", "2024-04-01", 0.6, scores=(0.4, 0.5, 0.3)),
            S("Greenvale Hollow", "Greenvale Hollow", 0.7)],
    },
    "04-geraldton-influenza.txt": {
        0: [T("25 March 2024", "2024-03-25", 0.95), S("Geraldton", "Geraldton"),
            D("influenza", "influenza"), E("outbreak", "outbreak")],
        1: [T("Two weeks later", None, 0.8), T("March 2024", "2024-03", 0.85),
            S("Carnarvon", "Carnarvon"),
            E("vaccination clinic", "vaccination clinic", 0.85),
            V("community health clinic", "clinic", 0.8)],
    },
    "05-kimberley-dengue.html": {
        0: [T("1 April 2024", "2024-04-01", 0.95),
            T("late 2024", "2024-13-01", 0.5, invalid=True),  # bad ISO month
            S("Broome", "Broome", 0.95), D("dengue", "dengue", 0.95),
            E("advisory", "advisory")],
        1: [T("3 April 2024", "2024-04-03"), S("Derby", "Derby", 0.85),
            V("district hospital", "hospital", 0.85)],
    },
    "06-goldfields-screening.txt": {
        0: [T("8 April 2024", "2024-04-08", 0.95), S("Kalgoorlie", "Kalgoorlie"),
            D("measles", "measles"), E("screening", "screening")],
        # reflection scores straddle the 0.7 threshold in this chunk:
        # exactly 0.7 on every criterion is kept (inclusive bound),
        # one criterion below drops the candidate
        1: [T("10 April 2024", "2024-04-10", scores=(0.7, 0.7, 0.7)),
            S("Esperance", "Esperance", 0.85, scores=(0.9, 0.8, 0.6)),
            V("supermarket", "supermarket", 0.8, scores=(0.69, 0.9, 0.9)),
            D("measles", "measles", 0.85, scores=(0.71, 0.7, 0.9))],
        2: [T("12 April 2024", "2024-04-12"), S("Kalgoorlie", "Kalgoorlie"),
            E("exposure", "exposure", 0.85)],
    },
    "07-peel-exposures.txt": {
        0: [T("9 April 2024", "2024-04-09"), S("Mandurah", "Mandurah"),
            D("measles", "measles"), E("exposure", "exposure", 0.85)],
        1: [T("11 April 2024", "2024-04-11"), S("Baldivis", "Baldivis", 0.8),
            V("cinema", "cinema")],
    },
    "08-nsw-influenza.txt": {
        0: [T("5 March 2024", "2024-03-05", 0.95), S("Sydney", "Sydney", 0.95),
            D("influenza", "influenza"), E("outbreak", "outbreak")],
        # "10 March 2024" is only a review date: over-extraction (gold FP)
        1: [T("7 March 2024", "2024-03-07"), T("10 March 2024", "2024-03-10", 0.8),
            S("Newcastle", "Newcastle", 0.85), V("harbourside hotel", "hotel", 0.85)],
    },
    "09-victoria-measles.md": {
        0: [T("4 April 2024", "2024-04-04", 0.95), S("Melbourne", "Melbourne", 0.95),
            D("measles", "measles"), E("exposure", "exposure"),
            V("laneway restaurant", "restaurant", 0.85)],
        # the model mislabels the screening sessions as an advisory
        1: [T("next Friday", None, 0.8), S("Geelong", "Geelong"),
            E("screening", "advisory", 0.6)],
    },
    "10-south-west-update.txt": {
        0: [T("10 April 2024", "2024-04-10"), S("Bunbury", "Bunbury"),
            S("Collie", "Collie", 0.85), D("measles", "measles"),
            E("exposure", "exposure", 0.85)],
        1: [T("11 April 2024", "2024-04-11"), S("Portland", "Portland", 0.8),
            V("school", "school", 0.8)],
    },
    "11-joondalup-cluster.txt": {
        0: [T("10 to 12 April 2024", "2024-04-10/2024-04-12"),
            S("Joondalup", "Joondalup"), D("measles", "measles"),
            E("exposure", "exposure", 0.85)],
        # the Fremantle mention goes unextracted (gold FN)
        1: [T("12 April 2024", "2024-04-12"), S("Perth", "Perth"),
            V("supermarket", "supermarket", 0.85)],
    },
    "12-wheatbelt-summary.txt": {
        0: [T("8 April 2024", "2024-04-08", 0.95), S("Northam", "Northam"),
            D("influenza", "influenza"), E("outbreak", "outbreak")],
        1: [T("3 days later", None, 0.85), S("Merredin", "Merredin"),
            V("community clinic", "clinic", 0.85)],
        # the influenza mention in this chunk goes unextracted (gold FN)
        2: [T("13 April 2024", "2024-04-13"), S("Katanning", "Katanning"),
            E("screening", "screening")],
    },
}

EXPECTED_CHUNKS = {
    "01-perth-measles-alert.txt": 2,
    "02-fremantle-cluster.md": 2,
    "03-great-southern-advisory.txt": 2,
    "04-geraldton-influenza.txt": 2,
    "05-kimberley-dengue.html": 2,
    "06-goldfields-screening.txt": 3,
    "07-peel-exposures.txt": 2,
    "08-nsw-influenza.txt": 2,
    "09-victoria-measles.md": 2,
    "10-south-west-update.txt": 2,
    "11-joondalup-cluster.txt": 2,
    "12-wheatbelt-summary.txt": 3,
}

# Reference annotations. Spatial entries are (name, lat, lon); coordinates
# follow the committed gazetteer except two deliberate annotator offsets
# (Mandurah +0.45 deg lat, Northam +0.9 deg lat) that give the report a
# known nonzero mean distance error, and Albany which is annotated without
# coordinates (excluded from the MDE, counted).
GOLD = {
    "01-perth-measles-alert.txt": {
        0: {"temporal": ["2024-03-12"],
            "spatial": [("Perth", -31.9523, 115.8613),
                        ("Fremantle", -32.0569, 115.7439)],
            "disease": ["measles"], "event_type": ["exposure"],
            "venue_type": ["airport", "restaurant"]},
        1: {"temporal": ["2024-03-13"],
            "spatial": [("Western Australia", -26.0, 121.0)],
            "venue_type": ["hospital"]},
    },
    "02-fremantle-cluster.md": {
        0: {"temporal": ["2024-03-17"],
            "spatial": [("Fremantle", -32.0569, 115.7439)],
            "disease": ["measles"], "event_type": ["outbreak"]},
        1: {"temporal": ["2024-03-21", "2024-03-22"],
            "spatial": [("Rockingham", -32.2769, 115.7297)],
            "venue_type": ["school"]},
    },
    "03-great-southern-advisory.txt": {
        0: {"temporal": ["2024-03-29", "2024-04-05"],
            "spatial": [("Albany", None, None)],
            "disease": ["whooping cough"], "event_type": ["advisory"]},
        1: {},
    },
    "04-geraldton-influenza.txt": {
        0: {"temporal": ["2024-03-25"],
            "spatial": [("Geraldton", -28.7774, 114.615)],
            "disease": ["influenza"], "event_type": ["outbreak"]},
        1: {"temporal": ["2024-04-08", "2024-03"],
            "spatial": [("Carnarvon", -24.8672, 113.6572)],
            "event_type": ["vaccination clinic"], "venue_type": ["clinic"]},
    },
    "05-kimberley-dengue.html": {
        0: {"temporal": ["2024-04-01"],
            "spatial": [("Broome", -17.9614, 122.2359)],
            "disease": ["dengue"], "event_type": ["advisory"]},
        1: {"temporal": ["2024-04-03"],
            "spatial": [("Derby", -17.3031, 123.6281)],
            "venue_type": ["hospital"]},
    },
    "06-goldfields-screening.txt": {
        0: {"temporal": ["2024-04-08"],
            "spatial": [("Kalgoorlie", -30.7489, 121.4658)],
            "disease": ["measles"], "event_type": ["screening"]},
        1: {"temporal": ["2024-04-10"],
            "spatial": [("Esperance", -33.8613, 121.891)],
            "disease": ["measles"], "venue_type": ["supermarket"]},
        2: {"temporal": ["2024-04-12"],
            "spatial": [("Kalgoorlie", -30.7489, 121.4658)],
            "event_type": ["exposure"]},
    },
    "07-peel-exposures.txt": {
        0: {"temporal": ["2024-04-09"],
            "spatial": [("Mandurah", -32.0769, 115.7217)],
            "disease": ["measles"], "event_type": ["exposure"]},
        1: {"temporal": ["2024-04-11"],
            "spatial": [("Baldivis", -32.329, 115.783)],
            "venue_type": ["cinema"]},
    },
    "08-nsw-influenza.txt": {
        0: {"temporal": ["2024-03-05"],
            "spatial": [("Sydney", -33.8688, 151.2093)],
            "disease": ["influenza"], "event_type": ["outbreak"]},
        1: {"temporal": ["2024-03-07"],
            "spatial": [("Newcastle", -32.9283, 151.7817)],
            "venue_type": ["hotel"]},
    },
    "09-victoria-measles.md": {
        0: {"temporal": ["2024-04-04"],
            "spatial": [("Melbourne", -37.8136, 144.9631)],
            "disease": ["measles"], "event_type": ["exposure"],
            "venue_type": ["restaurant"]},
        1: {"temporal": ["2024-04-05"],
            "spatial": [("Geelong", -38.1499, 144.3617)],
            "event_type": ["screening"]},
    },
    "10-south-west-update.txt": {
        0: {"temporal": ["2024-04-10"],
            "spatial": [("Bunbury", -33.3271, 115.6414),
                        ("Collie", -33.3622, 116.1561)],
            "disease": ["measles"], "event_type": ["exposure"]},
        1: {"temporal": ["2024-04-11"],
            "spatial": [("Portland", -38.3333, 141.6)],
            "venue_type": ["school"]},
    },
    "11-joondalup-cluster.txt": {
        0: {"temporal": ["2024-04-10/2024-04-12"],
            "spatial": [("Joondalup", -31.7448, 115.7661)],
            "disease": ["measles"], "event_type": ["exposure"]},
        1: {"temporal": ["2024-04-12"],
            "spatial": [("Perth", -31.9523, 115.8613),
                        ("Fremantle", -32.0569, 115.7439)],
            "venue_type": ["supermarket"]},
    },
    "12-wheatbelt-summary.txt": {
        0: {"temporal": ["2024-04-08"],
            "spatial": [("Northam", -30.7531, 116.6661)],
            "disease": ["influenza"], "event_type": ["outbreak"]},
        1: {"temporal": ["2024-04-11"],
            "spatial": [("Merredin", -31.4822, 118.279)],
            "venue_type": ["clinic"]},
        2: {"temporal": ["2024-04-13"],
            "spatial": [("Katanning", -33.6908, 117.5553)],
            "disease": ["influenza"], "event_type": ["screening"]},
    },
}


def build_payloads(schema, doc, chunks, name):
    """Response JSON per chunk, with spans located in the chunk text."""
    script = SCRIPT[name]
    assert len(chunks) == EXPECTED_CHUNKS[name], (
        f"{name}: expected {EXPECTED_CHUNKS[name]} chunks, got {len(chunks)}"
        f" (body {len(doc.body)} chars)"
    )
    assert set(script) <= set(range(len(chunks))), f"{name}: script indexes bad chunk"
    payloads = {}
    reflections = {}
    for idx, chunk in enumerate(chunks):
        entries = script.get(idx, [])
        payload = {d.name: [] for d in schema.dimensions}
        for entry in entries:
            assert entry["surface"] in chunk.text, (
                f"{name} chunk {idx}: surface {entry['surface']!r} not in chunk"
                f" [{chunk.char_start},{chunk.char_end})"
            )
            start = chunk.text.index(entry["surface"])
            payload[entry["dim"]].append({
                "text": entry["surface"],
                "span": [start, start + len(entry["surface"])],
                "value": entry["value"],
                "confidence": entry["conf"],
            })
        payloads[idx] = json.dumps(payload)
        # candidates reach reflection in payload order (schema dimension
        # order, script order within a dimension), minus validation drops
        valid = [
            e
            for dim in schema.dimensions
            for e in entries
            if e["dim"] == dim.name and not e["invalid"]
        ]
        reflections[idx] = json.dumps({"scores": [
            {"index": i, "relevance": e["scores"][0], "accuracy": e["scores"][1],
             "consistency": e["scores"][2]}
            for i, e in enumerate(valid)
        ]})
    return payloads, reflections


def assert_dedupe_overlap(doc, chunks):
    """The duplicated date in doc 03 must sit inside the chunk overlap."""
    surface = "5 April 2024"
    spans = []
    for chunk in chunks[:2]:
        assert surface in chunk.text
        start = chunk.text.index(surface)
        spans.append((chunk.char_start + start, chunk.char_start + start + len(surface)))
    (a, b), (c, d) = spans
    assert a < d and c < b, f"dedupe spans do not overlap: {spans}"


def main(out_dir: Path | None = None, verbose: bool = True) -> int:
    out_dir = Path(out_dir) if out_dir else DEMO_DIR
    schema = parse_schema_file(DEMO_DIR / "schema.yaml")
    docs = load_demo_corpus()
    assert len(docs) == len(SCRIPT) == len(GOLD)
    geocoder = GeocodingService(load_default_gazetteer())

    extraction_by_key: dict[tuple[str, int], str] = {}
    reflection_by_text: dict[str, str] = {}
    gold_lines = []

    for doc in docs:
        name = Path(doc.locator).name
        chunks = chunk_document(doc, "sliding_window", DEMO_CHUNK_SIZE,
                                DEMO_CHUNK_OVERLAP)
        payloads, reflections = build_payloads(schema, doc, chunks, name)
        if name == "03-great-southern-advisory.txt":
            assert_dedupe_overlap(doc, chunks)
        for idx, chunk in enumerate(chunks):
            extraction_by_key[(doc.doc_id, idx)] = payloads[idx]
            assert chunk.text not in reflection_by_text, "chunk texts must be unique"
            reflection_by_text[chunk.text] = reflections[idx]
            gold = GOLD[name].get(idx, {})
            record = {"doc_id": doc.doc_id, "chunk_index": idx}
            for dim in schema.dimensions:
                if dim.kind == "geocoded_spatial":
                    record[dim.name] = [
                        {"name": n} if lat is None else {"name": n, "lat": lat, "lon": lon}
                        for n, lat, lon in gold.get(dim.name, [])
                    ]
                else:
                    record[dim.name] = list(gold.get(dim.name, []))
            gold_lines.append(json.dumps(record, ensure_ascii=False))

    doc_id_re = re.compile(r"^doc_id: (\S+)$", re.MULTILINE)
    chunk_re = re.compile(r"^chunk: (\d+) of \d+$", re.MULTILINE)

    def respond(req):
        if req.system == EXTRACTION_SYSTEM:
            doc_id = doc_id_re.search(req.user).group(1)
            chunk_idx = int(chunk_re.search(req.user).group(1)) - 1
            return extraction_by_key[(doc_id, chunk_idx)]
        text = req.user.split("## Text\n", 1)[1].split("\n\n## Candidates", 1)[0]
        return reflection_by_text[text]

    from stindex.cli import demo_options

    fixtures: dict[str, str] = {}
    summaries = []
    for reflection in (True, False):
        backend = RecordingBackend(respond)
        opts = demo_options(reflection=reflection)
        kept = 0
        for doc in docs:
            result = extract_document(doc, schema, backend, opts, geocoder)
            assert all(s == "ok" for s in result.chunk_status), (
                doc.locator, result.chunk_status,
            )
            kept += len(result.entities)
            if reflection:
                summaries.append((Path(doc.locator).name, result))
        fixtures.update(backend.recorded)
        if verbose:
            print(f"reflection={reflection}: {kept} kept entities,"
                  f" {len(backend.recorded)} recorded responses")

    (out_dir / "replay_fixtures.json").write_text(
        json.dumps(dict(sorted(fixtures.items())), indent=1) + "\n",
        encoding="utf-8",
    )
    (out_dir / "gold.jsonl").write_text("\n".join(gold_lines) + "\n",
                                        encoding="utf-8")

    if not verbose:
        return 0
    print(f"\nwrote {len(fixtures)} fixtures and {len(gold_lines)} gold records")
    print("\nper-document outcome (reflection on):")
    for name, result in summaries:
        dims = {}
        for e in result.entities:
            dims[e.dimension] = dims.get(e.dimension, 0) + 1
        filtered = [(f.surface, f.reason) for f in result.filtered]
        geo = [
            (e.surface, e.value.resolved_name, e.value.hierarchy.get("country"))
            for e in result.entities if e.dimension == "spatial"
        ]
        temporal = [
            (e.surface, e.canonical_value())
            for e in result.entities if e.dimension == "temporal"
        ]
        print(f"  {name}: kept={dims} dedupe_removed={result.dedupe_removed}")
        print(f"    temporal={temporal}")
        print(f"    spatial={geo}")
        if filtered:
            print(f"    filtered={filtered}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
