#!/usr/bin/env python3
"""Declaring extraction dimensions and splitting documents into chunks.

The pipeline is schema-driven: a config file declares which dimensions to
extract (time and place are always present; everything else is up to you),
and long documents are chunked with configurable strategies before any
model sees them.
"""

from stindex import chunk_document, load_document, parse_schema, render_schema_instructions

SCHEMA_TEXT = """
version: "walkthrough"
dimensions:
  - name: temporal
    kind: normalized_temporal
    required: true
  - name: spatial
    kind: geocoded_spatial
    hierarchy: [country, admin, locality]
    required: true
  - name: disease
    kind: categorical
    vocabulary: [measles, influenza, dengue]
  - name: venue
    kind: structured
    attributes:
      - venue_name: text
      - capacity: number
"""

schema = parse_schema(SCHEMA_TEXT)
print("dimensions:", ", ".join(schema.names))
print("\nthe prompt fragment the model sees for these dimensions:\n")
print(render_schema_instructions(schema))

body = "\n\n".join(
    f"Paragraph {i}: " + "reported cases continue to climb across the region. " * 4
    for i in range(8)
)
doc = load_document(body, origin="raw_text")

for strategy in ("sliding_window", "paragraph", "element"):
    chunks = chunk_document(doc, strategy, size=400, overlap=60)
    spans = [(c.char_start, c.char_end) for c in chunks]
    print(f"\n{strategy}: {len(chunks)} chunks over {len(body)} chars")
    print("  spans:", spans[:6], "..." if len(spans) > 6 else "")
