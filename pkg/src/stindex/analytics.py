"""Spatiotemporal analytics over kept entities.

Events pair a day-grained (or finer) temporal value with a resolved
location from the same chunk, carrying the chunk's other entities as linked
attributes. Clustering is density-based with a joint neighborhood (within
eps_km AND within eps_days); bursts come from a sliding window scored
against the trailing baseline; the co-occurrence graph counts chunks in
which two canonical values appear together.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .engine import ExtractedEntity, ExtractionResult
from .errors import EmptyInput
from .geo import EARTH_RADIUS_KM, GeoValue
from .schema import SchemaSet
from .temporal import TemporalValue

DAY_GRANULARITIES = ("day", "hour", "minute")


@dataclass(frozen=True)
class StEvent:
    event_id: int
    doc_id: str
    chunk_index: int
    temporal: TemporalValue
    geo: GeoValue
    linked: tuple[tuple[str, str, str], ...] = ()  # (dimension, value, entity_id)
    temporal_entity_id: str = ""
    spatial_entity_id: str = ""

    @property
    def date(self) -> date:
        return self.temporal.date

    @property
    def lat(self) -> float:
        return self.geo.lat

    @property
    def lon(self) -> float:
        return self.geo.lon


@dataclass(frozen=True)
class StCluster:
    cluster_id: int
    member_event_ids: tuple[int, ...]
    centroid_lat: float
    centroid_lon: float
    start: date
    end: date

    @property
    def size(self) -> int:
        return len(self.member_event_ids)


@dataclass(frozen=True)
class BurstWindow:
    start: date
    end: date  # exclusive
    observed: int
    baseline_mean: float
    baseline_std: float
    z_score: float | None  # None when the trailing deviation is zero


@dataclass(frozen=True)
class CoocNode:
    node_id: str
    dimension: str
    value: str
    frequency: int  # number of chunks the value occurs in


@dataclass(frozen=True)
class CoocEdge:
    source: str
    target: str
    weight: int


@dataclass(frozen=True)
class CoocGraph:
    nodes: tuple[CoocNode, ...]
    edges: tuple[CoocEdge, ...]


def _eligible_temporal(entity: ExtractedEntity) -> bool:
    value = entity.value
    return isinstance(value, TemporalValue) and value.granularity in DAY_GRANULARITIES


def _eligible_spatial(entity: ExtractedEntity) -> bool:
    return isinstance(entity.value, GeoValue) and entity.value.resolved


def build_events(results: list[ExtractionResult]) -> tuple[list[StEvent], int]:
    """Pair timeable and locatable entities chunk by chunk.

    Returns (events, excluded) where excluded counts anchor entities that
    could not participate: too-coarse temporal values and unresolved
    locations.
    """
    events: list[StEvent] = []
    excluded = 0
    next_id = 0
    for result in results:
        by_chunk: dict[int, list[ExtractedEntity]] = {}
        for entity in result.entities:
            by_chunk.setdefault(entity.chunk_index, []).append(entity)
        for chunk_index in sorted(by_chunk):
            entities = by_chunk[chunk_index]
            temporals = [e for e in entities if isinstance(e.value, TemporalValue)]
            spatials = [e for e in entities if isinstance(e.value, GeoValue)]
            usable_t = [e for e in temporals if _eligible_temporal(e)]
            usable_s = [e for e in spatials if _eligible_spatial(e)]
            excluded += (len(temporals) - len(usable_t)) + (len(spatials) - len(usable_s))
            linked = tuple(
                (e.dimension, e.canonical_value(), e.entity_id)
                for e in entities
                if not isinstance(e.value, (TemporalValue, GeoValue))
            )
            for t in usable_t:
                for s in usable_s:
                    events.append(StEvent(
                        event_id=next_id,
                        doc_id=result.doc_id,
                        chunk_index=chunk_index,
                        temporal=t.value,
                        geo=s.value,
                        linked=linked,
                        temporal_entity_id=t.entity_id,
                        spatial_entity_id=s.entity_id,
                    ))
                    next_id += 1
    return events, excluded


def _neighbor_matrix(events: list[StEvent], eps_km: float, eps_days: float) -> np.ndarray:
    lat = np.radians(np.array([e.lat for e in events], dtype=float))
    lon = np.radians(np.array([e.lon for e in events], dtype=float))
    days = np.array([e.date.toordinal() for e in events], dtype=float)
    dphi = lat[:, None] - lat[None, :]
    dlam = lon[:, None] - lon[None, :]
    a = np.sin(dphi / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlam / 2) ** 2
    km = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    dt = np.abs(days[:, None] - days[None, :])
    return (km <= eps_km) & (dt <= eps_days)


def cluster_st(
    events: list[StEvent],
    eps_km: float = 50.0,
    eps_days: float = 7.0,
    min_pts: int = 2,
) -> tuple[list[StCluster], list[int]]:
    """Density-based clustering with joint spatial/temporal radii.

    Standard core/border/noise semantics; the neighborhood includes the
    point itself, so min_pts=2 makes pairs clusterable and singletons
    impossible. Border points join the first core cluster that reaches them
    in ascending event_id order; clusters come back sorted by earliest
    member time.
    """
    if not events:
        return [], []
    order = sorted(range(len(events)), key=lambda i: events[i].event_id)
    ordered = [events[i] for i in order]
    neighbors = _neighbor_matrix(ordered, eps_km, eps_days)
    counts = neighbors.sum(axis=1)
    core = counts >= min_pts

    labels = [-1] * len(ordered)  # -1 = noise/unvisited
    cluster_members: list[list[int]] = []
    for i in range(len(ordered)):
        if labels[i] != -1 or not core[i]:
            continue
        cid = len(cluster_members)
        cluster_members.append([])
        queue = [i]
        labels[i] = cid
        while queue:
            p = queue.pop(0)
            cluster_members[cid].append(p)
            if not core[p]:
                continue  # border points do not expand
            for q in np.flatnonzero(neighbors[p]):
                if labels[q] == -1:
                    labels[q] = cid
                    queue.append(int(q))

    clusters = []
    for members in cluster_members:
        ids = sorted(ordered[m].event_id for m in members)
        dates = [ordered[m].date for m in members]
        clusters.append(StCluster(
            cluster_id=-1,
            member_event_ids=tuple(ids),
            centroid_lat=float(np.mean([ordered[m].lat for m in members])),
            centroid_lon=float(np.mean([ordered[m].lon for m in members])),
            start=min(dates),
            end=max(dates),
        ))
    clusters.sort(key=lambda c: (c.start, c.member_event_ids[0]))
    clusters = [
        StCluster(
            cluster_id=i,
            member_event_ids=c.member_event_ids,
            centroid_lat=c.centroid_lat,
            centroid_lon=c.centroid_lon,
            start=c.start,
            end=c.end,
        )
        for i, c in enumerate(clusters)
    ]
    noise = sorted(
        ordered[i].event_id for i in range(len(ordered)) if labels[i] == -1
    )
    return clusters, noise


def _event_date(item) -> date:
    if isinstance(item, date):
        return item
    return item.date


def detect_bursts(
    events,
    window_days: int = 7,
    step_days: int = 1,
    z: float = 2.0,
    min_count: int = 3,
) -> list[BurstWindow]:
    """Sliding-window burst detection against a trailing baseline.

    A window is flagged iff its count is at least baseline_mean + z*sigma
    over all preceding windows AND at least min_count; the first window has
    no baseline and is never flagged. Overlapping flagged windows merge into
    maximal runs reported at their peak window.
    """
    dates = sorted(_event_date(e) for e in events)
    if not dates:
        raise EmptyInput("burst detection needs at least one dated event")
    first, last = dates[0], dates[-1]
    ordinals = np.array([d.toordinal() for d in dates])

    starts = []
    cursor = first
    while cursor <= last:
        starts.append(cursor)
        cursor += timedelta(days=step_days)
    counts = np.array([
        int(np.sum((ordinals >= s.toordinal()) & (ordinals < s.toordinal() + window_days)))
        for s in starts
    ])

    flagged: list[int] = []
    stats: dict[int, tuple[float, float]] = {}
    for i in range(1, len(starts)):
        baseline = counts[:i]
        mean = float(np.mean(baseline))
        std = float(np.std(baseline))
        if counts[i] >= mean + z * std and counts[i] >= min_count:
            flagged.append(i)
            stats[i] = (mean, std)

    bursts: list[BurstWindow] = []
    run: list[int] = []
    for i in flagged:
        if run and starts[i] < starts[run[-1]] + timedelta(days=window_days):
            run.append(i)
        else:
            if run:
                bursts.append(_burst_from_run(run, starts, counts, stats, window_days))
            run = [i]
    if run:
        bursts.append(_burst_from_run(run, starts, counts, stats, window_days))
    return bursts


def _burst_from_run(run, starts, counts, stats, window_days) -> BurstWindow:
    peak = max(run, key=lambda i: (counts[i], -i))
    mean, std = stats[peak]
    observed = int(counts[peak])
    z_score = (observed - mean) / std if std > 0 else None
    return BurstWindow(
        start=starts[run[0]],
        end=starts[run[-1]] + timedelta(days=window_days),
        observed=observed,
        baseline_mean=mean,
        baseline_std=std,
        z_score=z_score,
    )


def cooccurrence_graph(results: list[ExtractionResult]) -> CoocGraph:
    """Chunk-scoped co-occurrence network over canonical values."""
    chunk_nodes: dict[tuple[str, int], set[tuple[str, str]]] = {}
    for result in results:
        for entity in result.entities:
            key = (entity.doc_id, entity.chunk_index)
            chunk_nodes.setdefault(key, set()).add(
                (entity.dimension, entity.canonical_value())
            )
    frequency: dict[tuple[str, str], int] = {}
    weights: dict[tuple[str, str], int] = {}
    for nodes in chunk_nodes.values():
        for node in nodes:
            frequency[node] = frequency.get(node, 0) + 1
        ids = sorted(f"{dim}:{value}" for dim, value in nodes)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                weights[(ids[i], ids[j])] = weights.get((ids[i], ids[j]), 0) + 1
    nodes = tuple(
        CoocNode(node_id=f"{dim}:{value}", dimension=dim, value=value, frequency=freq)
        for (dim, value), freq in sorted(
            frequency.items(), key=lambda kv: f"{kv[0][0]}:{kv[0][1]}"
        )
    )
    edges = tuple(
        CoocEdge(source=a, target=b, weight=w)
        for (a, b), w in sorted(weights.items())
    )
    return CoocGraph(nodes=nodes, edges=edges)


@dataclass(frozen=True)
class AnalyticsBundle:
    events: tuple[StEvent, ...]
    excluded_entities: int
    clusters: tuple[StCluster, ...]
    noise_event_ids: tuple[int, ...]
    bursts: tuple[BurstWindow, ...]
    graph: CoocGraph
    breakdown: tuple


def analyze(
    results: list[ExtractionResult],
    schema: SchemaSet | None = None,
    *,
    eps_km: float = 50.0,
    eps_days: float = 7.0,
    min_pts: int = 2,
    window_days: int = 7,
    step_days: int = 1,
    z: float = 2.0,
    min_count: int = 3,
) -> AnalyticsBundle:
    """All analytics over one run; degenerate runs yield empty sections."""
    events, excluded = build_events(results)
    clusters, noise = cluster_st(events, eps_km, eps_days, min_pts)
    try:
        bursts = detect_bursts(events, window_days, step_days, z, min_count)
    except EmptyInput:
        bursts = []
    graph = cooccurrence_graph(results)
    entities = [e for r in results for e in r.entities]
    breakdown = dimension_breakdown(entities, schema)
    return AnalyticsBundle(
        events=tuple(events),
        excluded_entities=excluded,
        clusters=tuple(clusters),
        noise_event_ids=tuple(noise),
        bursts=tuple(bursts),
        graph=graph,
        breakdown=tuple(breakdown),
    )


@dataclass(frozen=True)
class BreakdownRow:
    dimension: str
    total: int
    values: tuple[tuple[str, int], ...]  # (canonical value, count) desc, ties lexicographic


def dimension_breakdown(
    entities: list[ExtractedEntity], schema: SchemaSet | None = None,
) -> list[BreakdownRow]:
    """Per-dimension frequency table over kept entities.

    With a schema, required dimensions come first (schema order within each
    group); otherwise dimensions appear in first-appearance order.
    """
    counts: dict[str, dict[str, int]] = {}
    for entity in entities:
        per_dim = counts.setdefault(entity.dimension, {})
        value = entity.canonical_value()
        per_dim[value] = per_dim.get(value, 0) + 1

    if schema is not None:
        order = [d.name for d in sorted(schema.dimensions, key=lambda d: not d.required)]
        order = [name for name in order if name in counts]
        order += [name for name in counts if name not in order]
    else:
        order = list(counts)

    rows = []
    for name in order:
        per_dim = counts[name]
        values = tuple(sorted(per_dim.items(), key=lambda kv: (-kv[1], kv[0])))
        rows.append(BreakdownRow(
            dimension=name, total=sum(per_dim.values()), values=values,
        ))
    return rows
