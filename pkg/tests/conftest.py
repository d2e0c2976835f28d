"""Shared fixtures and hypothesis strategies."""

from __future__ import annotations

from datetime import datetime
from pathlib import Path

import pytest
from hypothesis import strategies as st

from stindex.temporal import GRANULARITIES, TemporalValue

PKG_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = PKG_ROOT / "src" / "stindex" / "data"
DEMO_DIR = DATA_DIR / "demo"


@pytest.fixture(scope="session")
def gazetteer_path() -> Path:
    return DATA_DIR / "gazetteer.tsv"


def instants(granularity: str) -> st.SearchStrategy[datetime]:
    """Calendar-valid timestamps truncated to the given granularity."""
    base = st.datetimes(
        min_value=datetime(1800, 1, 1), max_value=datetime(2199, 12, 31, 23, 59)
    )
    cut = GRANULARITIES.index(granularity)

    def truncate(dt: datetime) -> datetime:
        parts = [dt.year, dt.month, dt.day, dt.hour, dt.minute]
        defaults = [None, 1, 1, 0, 0]
        for i in range(cut + 1, 5):
            parts[i] = defaults[i]
        return datetime(*parts)

    return base.map(truncate)


def temporal_values() -> st.SearchStrategy[TemporalValue]:
    """Arbitrary valid TemporalValue (instants and ordered intervals)."""

    def build(granularity: str, kind: str):
        if kind == "instant":
            return st.builds(
                lambda s: TemporalValue(kind="instant", start=s, granularity=granularity),
                instants(granularity),
            )
        return st.builds(
            lambda a, b: TemporalValue(
                kind="interval",
                start=min(a, b),
                end=max(a, b),
                granularity=granularity,
            ),
            instants(granularity),
            instants(granularity),
        )

    return st.sampled_from(GRANULARITIES).flatmap(
        lambda g: st.sampled_from(["instant", "interval"]).flatmap(
            lambda k: build(g, k)
        )
    )
