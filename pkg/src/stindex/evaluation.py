"""Scoring extraction runs against gold annotations.

Matching is greedy one-to-one within each (doc_id, chunk_index): temporal
values match exactly on their canonical ISO form, spatial names fuzzily
(substring or word overlap >= tau), and every other dimension exactly on
its canonical value. Percentages are rounded half-toward-zero at two
decimals, which reproduces the published metric table bit-for-bit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_DOWN, Decimal
from pathlib import Path

from .engine import ExtractedEntity, ExtractionResult
from .errors import KeyMismatch, NoMeasurablePairs, StindexError
from .geo import GeoValue, haversine_km
from .schema import SchemaSet
from .temporal import parse_iso

DEFAULT_TAU = 0.5


def _round2(x: float) -> float:
    return float(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_DOWN))


def _pct(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return 0.0
    return _round2(100.0 * numerator / denominator)


@dataclass(frozen=True)
class GoldSpatial:
    name: str
    lat: float | None = None
    lon: float | None = None


@dataclass(frozen=True)
class GoldRecord:
    doc_id: str
    chunk_index: int
    temporal: tuple[str, ...] = ()
    spatial: tuple[GoldSpatial, ...] = ()
    other: dict = field(default_factory=dict)  # dimension -> tuple of canonical values

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.chunk_index)


def _canonical_other(value) -> str:
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True, ensure_ascii=False)
    return str(value)


def gold_record_from_dict(raw: dict, temporal_dim: str, spatial_dim: str) -> GoldRecord:
    temporal = []
    for iso in raw.get(temporal_dim, ()):
        parse_iso(iso)  # validates syntax and calendar
        temporal.append(iso)
    spatial = []
    for entry in raw.get(spatial_dim, ()):
        if isinstance(entry, str):
            spatial.append(GoldSpatial(name=entry))
            continue
        lat, lon = entry.get("lat"), entry.get("lon")
        if lat is not None and not -90 <= lat <= 90:
            raise ValueError(f"gold latitude out of range: {lat}")
        if lon is not None and not -180 <= lon <= 180:
            raise ValueError(f"gold longitude out of range: {lon}")
        spatial.append(GoldSpatial(name=entry["name"], lat=lat, lon=lon))
    other = {
        key: tuple(_canonical_other(v) for v in values)
        for key, values in raw.items()
        if key not in (temporal_dim, spatial_dim, "doc_id", "chunk_index")
    }
    return GoldRecord(
        doc_id=raw["doc_id"],
        chunk_index=int(raw["chunk_index"]),
        temporal=tuple(temporal),
        spatial=tuple(spatial),
        other=other,
    )


def load_gold(path: str | Path, schema: SchemaSet) -> list[GoldRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                gold_record_from_dict(raw, schema.temporal.name, schema.spatial.name)
            )
        except (ValueError, KeyError, StindexError) as exc:
            raise ValueError(f"gold file line {i}: {exc}") from exc
    return records


# -- matching primitives -----------------------------------------------------


def greedy_match(preds: list, golds: list, predicate) -> tuple[list, list, list]:
    """One-to-one greedy matching in pred order; each gold consumed once.

    Returns (matched pairs, unmatched preds, unmatched golds).
    """
    consumed = [False] * len(golds)
    pairs = []
    false_positives = []
    for pred in preds:
        hit = None
        for j, gold in enumerate(golds):
            if not consumed[j] and predicate(pred, gold):
                hit = j
                break
        if hit is None:
            false_positives.append(pred)
        else:
            consumed[hit] = True
            pairs.append((pred, golds[hit]))
    false_negatives = [g for j, g in enumerate(golds) if not consumed[j]]
    return pairs, false_positives, false_negatives


def match_temporal(pred_values: list[str], gold_values: list[str]):
    """Exact ISO match after canonicalizing both sides."""

    def canonical(v: str) -> str:
        return parse_iso(v).serialize()

    return greedy_match(
        pred_values, gold_values, lambda p, g: canonical(p) == canonical(g)
    )


_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)


def _normalize_name(name: str) -> str:
    return " ".join(_PUNCT_RE.sub(" ", name.casefold()).split())


def spatial_fuzzy_match(pred_name: str, gold_name: str, tau: float = DEFAULT_TAU) -> bool:
    """Substring either way, or word overlap / min token count >= tau."""
    a = _normalize_name(pred_name)
    b = _normalize_name(gold_name)
    if not a or not b:
        return False
    if a in b or b in a:
        return True
    ta, tb = set(a.split()), set(b.split())
    return len(ta & tb) / min(len(ta), len(tb)) >= tau


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision/recall/F1 as percentages (0 when a denominator is 0)."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return _pct(precision, 1), _pct(recall, 1), _pct(f1, 1)


def combined_f1(t_f1: float, s_f1: float) -> float:
    """Arithmetic mean of the temporal and spatial F1 percentages.

    Computed in decimal and rounded half-toward-zero so the half-point
    cells of the published table (73.815 -> 73.81, 72.325 -> 72.32) come
    out exactly.
    """
    mean = (Decimal(repr(t_f1)) + Decimal(repr(s_f1))) / 2
    return float(mean.quantize(Decimal("0.01"), rounding=ROUND_HALF_DOWN))


def mde(pairs: list[tuple[tuple[float, float], tuple[float, float]]]) -> float:
    """Mean great-circle distance over (pred, gold) coordinate pairs."""
    if not pairs:
        raise NoMeasurablePairs("no matched spatial pair carries both coordinates")
    total = sum(haversine_km(p[0], p[1], g[0], g[1]) for p, g in pairs)
    return total / len(pairs)


# -- full-run evaluation --------------------------------------------------------


@dataclass(frozen=True)
class DimensionScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "DimensionScore":
        p, r, f = prf(tp, fp, fn)
        return cls(tp=tp, fp=fp, fn=fn, precision=p, recall=r, f1=f)


@dataclass
class EvalReport:
    dimensions: dict  # name -> DimensionScore, in schema order
    combined_f1: float
    normalization_accuracy: float  # percent of gold temporal values matched exactly
    geocoding_success_rate: float  # percent of kept spatial entities resolved
    mde_km: float | None
    mde_pairs: int
    mde_excluded: int
    gold_chunks: int

    def to_payload(self) -> dict:
        return {
            "dimensions": {
                name: {
                    "tp": s.tp, "fp": s.fp, "fn": s.fn,
                    "precision": s.precision, "recall": s.recall, "f1": s.f1,
                }
                for name, s in self.dimensions.items()
            },
            "combined_f1": self.combined_f1,
            "normalization_accuracy": self.normalization_accuracy,
            "geocoding_success_rate": self.geocoding_success_rate,
            "mde_km": None if self.mde_km is None else round(self.mde_km, 2),
            "mde_pairs": self.mde_pairs,
            "mde_excluded": self.mde_excluded,
            "gold_chunks": self.gold_chunks,
        }


def _pred_name(entity: ExtractedEntity) -> str:
    value = entity.value
    if isinstance(value, GeoValue) and value.resolved_name:
        return value.resolved_name
    return entity.surface


def evaluate_run(
    results: list[ExtractionResult],
    gold: list[GoldRecord],
    schema: SchemaSet,
    tau: float = DEFAULT_TAU,
) -> EvalReport:
    """Score a run against gold annotations, Table-1 style.

    Raises KeyMismatch when predictions reference a (doc_id, chunk_index)
    absent from the gold set.
    """
    gold_by_key = {record.key: record for record in gold}
    temporal_dim = schema.temporal.name
    spatial_dim = schema.spatial.name

    preds_by_key: dict[tuple[str, int], list[ExtractedEntity]] = {}
    spatial_total = 0
    spatial_resolved = 0
    for result in results:
        for entity in result.entities:
            key = (entity.doc_id, entity.chunk_index)
            if key not in gold_by_key:
                raise KeyMismatch(
                    f"prediction references unknown gold chunk {key}"
                )
            preds_by_key.setdefault(key, []).append(entity)
            if entity.dimension == spatial_dim:
                spatial_total += 1
                if isinstance(entity.value, GeoValue) and entity.value.resolved:
                    spatial_resolved += 1

    dim_names = [d.name for d in schema.dimensions]
    counts = {name: [0, 0, 0] for name in dim_names}  # tp, fp, fn
    mde_values: list[tuple[tuple[float, float], tuple[float, float]]] = []
    mde_excluded = 0
    gold_temporal_total = 0
    gold_temporal_matched = 0

    for record in gold:
        preds = preds_by_key.get(record.key, [])
        by_dim: dict[str, list[ExtractedEntity]] = {}
        for entity in sorted(preds, key=lambda e: e.entity_id):
            by_dim.setdefault(entity.dimension, []).append(entity)

        # temporal: exact match on canonical serializations
        t_preds = [e.canonical_value() for e in by_dim.get(temporal_dim, [])]
        pairs, fps, fns = match_temporal(t_preds, list(record.temporal))
        counts[temporal_dim][0] += len(pairs)
        counts[temporal_dim][1] += len(fps)
        counts[temporal_dim][2] += len(fns)
        gold_temporal_total += len(record.temporal)
        gold_temporal_matched += len(pairs)

        # spatial: fuzzy name match; coordinate pairs feed the MDE
        s_preds = by_dim.get(spatial_dim, [])
        pairs, fps, fns = greedy_match(
            s_preds, list(record.spatial),
            lambda e, g: spatial_fuzzy_match(_pred_name(e), g.name, tau),
        )
        counts[spatial_dim][0] += len(pairs)
        counts[spatial_dim][1] += len(fps)
        counts[spatial_dim][2] += len(fns)
        for entity, gold_entry in pairs:
            value = entity.value
            has_pred = isinstance(value, GeoValue) and value.lat is not None
            if has_pred and gold_entry.lat is not None and gold_entry.lon is not None:
                mde_values.append(
                    ((value.lat, value.lon), (gold_entry.lat, gold_entry.lon))
                )
            else:
                mde_excluded += 1

        # every other dimension: exact match on canonical values
        for name in dim_names:
            if name in (temporal_dim, spatial_dim):
                continue
            p_values = [e.canonical_value() for e in by_dim.get(name, [])]
            g_values = list(record.other.get(name, ()))
            pairs, fps, fns = greedy_match(p_values, g_values, lambda p, g: p == g)
            counts[name][0] += len(pairs)
            counts[name][1] += len(fps)
            counts[name][2] += len(fns)

    dimensions = {
        name: DimensionScore.from_counts(*counts[name]) for name in dim_names
    }
    mean_distance = None
    if mde_values:
        mean_distance = mde(mde_values)
    return EvalReport(
        dimensions=dimensions,
        combined_f1=combined_f1(
            dimensions[temporal_dim].f1, dimensions[spatial_dim].f1
        ),
        normalization_accuracy=_pct(gold_temporal_matched, gold_temporal_total),
        geocoding_success_rate=_pct(spatial_resolved, spatial_total),
        mde_km=mean_distance,
        mde_pairs=len(mde_values),
        mde_excluded=mde_excluded,
        gold_chunks=len(gold),
    )


# -- rendering -----------------------------------------------------------------


def render_report_table(report: EvalReport, schema: SchemaSet, label: str = "run") -> str:
    """Plain-text table mirroring the published two-block layout."""
    t = report.dimensions[schema.temporal.name]
    s = report.dimensions[schema.spatial.name]
    mde_text = f"{report.mde_km:.2f}" if report.mde_km is not None else "n/a"
    lines = [
        f"{'Mode':<10}{'T-P':>8}{'T-R':>8}{'T-F1':>8}{'Comb-F1':>9}",
        f"{label:<10}{t.precision:>8.2f}{t.recall:>8.2f}{t.f1:>8.2f}"
        f"{report.combined_f1:>9.2f}",
        f"{'Mode':<10}{'S-P':>8}{'S-R':>8}{'S-F1':>8}{'MDE(km)':>9}",
        f"{label:<10}{s.precision:>8.2f}{s.recall:>8.2f}{s.f1:>8.2f}{mde_text:>9}",
        "",
        f"{'Dimension':<14}{'TP':>5}{'FP':>5}{'FN':>5}{'P':>8}{'R':>8}{'F1':>8}",
    ]
    for name, score in report.dimensions.items():
        lines.append(
            f"{name:<14}{score.tp:>5}{score.fp:>5}{score.fn:>5}"
            f"{score.precision:>8.2f}{score.recall:>8.2f}{score.f1:>8.2f}"
        )
    lines += [
        "",
        f"Temporal normalization accuracy: {report.normalization_accuracy:.2f}%",
        f"Geocoding success rate: {report.geocoding_success_rate:.2f}%",
        f"MDE over {report.mde_pairs} coordinate pairs"
        f" ({report.mde_excluded} excluded): {mde_text} km",
    ]
    return "\n".join(lines)


def render_comparison(baseline: EvalReport, other: EvalReport, schema: SchemaSet) -> str:
    """Improvement lines in both percentage points and relative percent."""

    def rel(new: float, old: float) -> str:
        if old == 0:
            return "n/a"
        return f"{100.0 * (new - old) / old:+.2f}%"

    lines = ["Improvement (other vs baseline):"]
    for name in (schema.temporal.name, schema.spatial.name):
        b = baseline.dimensions[name]
        o = other.dimensions[name]
        lines.append(
            f"  {name}: P {o.precision - b.precision:+.2f} pp, "
            f"R {o.recall - b.recall:+.2f} pp, F1 {o.f1 - b.f1:+.2f} pp"
        )
    lines.append(
        f"  combined F1: {other.combined_f1 - baseline.combined_f1:+.2f} pp"
        f" ({rel(other.combined_f1, baseline.combined_f1)} relative)"
    )
    if baseline.mde_km is not None and other.mde_km is not None:
        lines.append(
            f"  MDE: {other.mde_km - baseline.mde_km:+.2f} km"
            f" ({rel(other.mde_km, baseline.mde_km)} relative)"
        )
    return "\n".join(lines)
