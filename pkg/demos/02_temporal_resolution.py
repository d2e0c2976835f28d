#!/usr/bin/env python3
"""Normalizing temporal expressions to ISO 8601.

Absolute values parse at whatever granularity the text supports; relative
expressions ("the next day", "two weeks later") resolve against the most
recent absolute date seen in the document, which is how the pipeline keeps
dates consistent across chunks.
"""

from stindex import parse_iso, resolve_relative, temporal_exact_match

for text in ("2024", "2024-03", "2024-03-15", "2024-03-15T10:30",
             "2024-03-15/2024-03-18"):
    value = parse_iso(text)
    print(f"{text:>24} -> kind={value.kind:<9} granularity={value.granularity}")

anchor = parse_iso("2024-02-20")
print(f"\nanchor: {anchor.serialize()}")
for expression in ("the next day", "yesterday", "two weeks later",
                   "3 months earlier", "next friday", "this week",
                   "last month"):
    resolved = resolve_relative(expression, anchor)
    print(f"{expression:>24} -> {resolved.serialize()}")

leap = parse_iso("2024-01-31")
print(f"\nmonth arithmetic clamps: {leap.serialize()} + one month ->",
      resolve_relative("one month later", leap).serialize())

a, b = parse_iso("2024-03-15"), parse_iso("2024-03")
print(f"\nexact match is granularity-aware: "
      f"{a.serialize()} vs {b.serialize()} -> {temporal_exact_match(a, b)}")
