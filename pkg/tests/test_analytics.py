from datetime import date, timedelta

import numpy as np
import pytest

from stindex.analytics import (
    StEvent,
    build_events,
    cluster_st,
    cooccurrence_graph,
    detect_bursts,
    dimension_breakdown,
)
from stindex.engine import CategoryValue, ExtractedEntity, ExtractionResult
from stindex.errors import EmptyInput
from stindex.geo import GeoValue, haversine_km
from stindex.schema import parse_schema
from stindex.temporal import parse_iso

BASE = date(2024, 4, 1)


def ev(event_id: int, lat: float, lon: float, day: int) -> StEvent:
    d = BASE + timedelta(days=day)
    return StEvent(
        event_id=event_id,
        doc_id="doc",
        chunk_index=0,
        temporal=parse_iso(d.isoformat()),
        geo=GeoValue(
            name=f"p{event_id}", resolved_name=f"p{event_id}", lat=lat, lon=lon,
            hierarchy={"country": "AU"}, resolution_level="exact",
            provider="gazetteer",
        ),
    )


# -- independent brute-force DBSCAN oracle ----------------------------------


def brute_force_dbscan(events, eps_km, eps_days, min_pts):
    """O(n^2) reference: returns (core partition as set of frozensets, noise set)."""
    n = len(events)
    neigh = [set() for _ in range(n)]
    for i in range(n):
        for j in range(n):
            close = haversine_km(events[i].lat, events[i].lon,
                                 events[j].lat, events[j].lon) <= eps_km
            near = abs(events[i].date.toordinal() - events[j].date.toordinal()) <= eps_days
            if close and near:
                neigh[i].add(j)
    core = [len(neigh[i]) >= min_pts for i in range(n)]

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for i in range(n):
        if core[i]:
            for j in neigh[i]:
                if core[j]:
                    union(i, j)

    components: dict[int, set[int]] = {}
    for i in range(n):
        if core[i]:
            components.setdefault(find(i), set()).add(events[i].event_id)
    partition = {frozenset(v) for v in components.values()}
    noise = {
        events[i].event_id
        for i in range(n)
        if not core[i] and not any(core[j] for j in neigh[i])
    }
    core_ids = {events[i].event_id for i in range(n) if core[i]}
    return partition, noise, core_ids


def random_instance(rng: np.random.RandomState, n: int):
    events = []
    k = rng.randint(1, 6)
    centers = [(rng.uniform(-36, -16), rng.uniform(112, 153), rng.randint(0, 50))
               for _ in range(k)]
    for i in range(n):
        if rng.rand() < 0.8:
            clat, clon, cday = centers[rng.randint(0, k)]
            lat = clat + rng.normal(0, 0.4)
            lon = clon + rng.normal(0, 0.4)
            day = int(cday + rng.randint(-4, 5))
        else:
            lat = rng.uniform(-36, -16)
            lon = rng.uniform(112, 153)
            day = int(rng.randint(0, 60))
        events.append(ev(i, lat, lon, max(0, day)))
    return events


def assert_matches_oracle(events, eps_km, eps_days, min_pts):
    clusters, noise = cluster_st(events, eps_km, eps_days, min_pts)
    partition, oracle_noise, core_ids = brute_force_dbscan(
        events, eps_km, eps_days, min_pts
    )
    assert set(noise) == oracle_noise
    got_partition = {
        frozenset(set(c.member_event_ids) & core_ids) for c in clusters
    }
    assert got_partition == partition
    # every event lands in exactly one of cluster/noise
    clustered = [e for c in clusters for e in c.member_event_ids]
    assert len(clustered) == len(set(clustered))
    assert set(clustered) | set(noise) == {e.event_id for e in events}
    assert not (set(clustered) & set(noise))


class TestClusterSt:
    def test_three_colocated_events_one_cluster(self):
        events = [ev(0, -31.95, 115.86, 1), ev(1, -31.95, 115.86, 2),
                  ev(2, -31.95, 115.86, 3)]
        clusters, noise = cluster_st(events)
        assert len(clusters) == 1
        assert clusters[0].member_event_ids == (0, 1, 2)
        assert noise == []
        assert_matches_oracle(events, 50, 7, 2)

    def test_isolated_event_is_noise(self):
        clusters, noise = cluster_st([ev(0, -31.95, 115.86, 1)])
        assert clusters == [] and noise == [0]

    def test_two_events_100km_apart_are_noise(self):
        # 0.9 degrees of latitude is ~100 km, beyond the 50 km radius
        events = [ev(0, -31.0, 115.86, 1), ev(1, -31.9, 115.86, 1)]
        clusters, noise = cluster_st(events, eps_km=50)
        assert clusters == [] and noise == [0, 1]

    def test_pair_forms_cluster_with_min_pts_2(self):
        events = [ev(0, -31.95, 115.86, 1), ev(1, -31.96, 115.87, 2)]
        clusters, noise = cluster_st(events)
        assert len(clusters) == 1 and clusters[0].size == 2

    def test_temporal_radius_respected(self):
        events = [ev(0, -31.95, 115.86, 0), ev(1, -31.95, 115.86, 10)]
        clusters, noise = cluster_st(events, eps_days=7)
        assert clusters == [] and set(noise) == {0, 1}

    def test_clusters_sorted_by_earliest_member_time(self):
        events = [
            ev(0, -33.87, 151.21, 20), ev(1, -33.87, 151.21, 21),  # later pair
            ev(2, -31.95, 115.86, 1), ev(3, -31.95, 115.86, 2),    # earlier pair
        ]
        clusters, _ = cluster_st(events)
        assert [c.cluster_id for c in clusters] == [0, 1]
        assert clusters[0].member_event_ids == (2, 3)
        assert clusters[0].start == BASE + timedelta(days=1)

    def test_centroid_is_coordinate_mean(self):
        events = [ev(0, -31.0, 115.0, 1), ev(1, -31.1, 115.1, 2)]  # ~15 km apart
        clusters, _ = cluster_st(events)
        assert clusters[0].centroid_lat == pytest.approx(-31.05)
        assert clusters[0].centroid_lon == pytest.approx(115.05)

    def test_permutation_invariance_on_clean_instance(self):
        events = [ev(i, -31.95 + 0.001 * i, 115.86, 1 + i % 3) for i in range(6)]
        a, _ = cluster_st(events)
        b, _ = cluster_st(list(reversed(events)))
        assert [set(c.member_event_ids) for c in a] == [set(c.member_event_ids) for c in b]

    def test_oracle_equivalence_on_random_instances(self):
        rng = np.random.RandomState(7)
        for params in [(50, 7, 2), (120, 21, 3), (20, 2, 2)]:
            events = random_instance(rng, 80)
            assert_matches_oracle(events, *params)

    def test_empty_input(self):
        assert cluster_st([]) == ([], [])


def burst_events(daily_counts, start=BASE):
    events = []
    i = 0
    for day, count in enumerate(daily_counts):
        for _ in range(count):
            events.append(ev(i, -31.95, 115.86, day))
            i += 1
    return events


class TestDetectBursts:
    def test_spike_flagged(self):
        events = burst_events([1, 1, 1, 1, 10])
        bursts = detect_bursts(events, window_days=1, step_days=1, z=2.0, min_count=3)
        assert len(bursts) == 1
        b = bursts[0]
        assert b.start == BASE + timedelta(days=4)
        assert b.end == BASE + timedelta(days=5)
        assert b.observed == 10
        assert b.baseline_mean == 1.0
        assert b.baseline_std == 0.0
        assert b.z_score is None

    def test_uniform_counts_no_burst(self):
        bursts = detect_bursts(burst_events([2, 2, 2, 2]), window_days=1, step_days=1)
        assert bursts == []

    def test_single_event_no_burst(self):
        assert detect_bursts(burst_events([1])) == []

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            detect_bursts([])

    def test_overlapping_flagged_windows_merge(self):
        # window counts for window=2: [2,2,7,12,6]; windows 3 and 4 flag and merge
        events = burst_events([1, 1, 1, 6, 6])
        bursts = detect_bursts(events, window_days=2, step_days=1, z=2.0, min_count=3)
        assert len(bursts) == 1
        b = bursts[0]
        assert b.start == BASE + timedelta(days=2)
        assert b.end == BASE + timedelta(days=5)
        assert b.observed == 12
        assert b.baseline_mean == pytest.approx(11 / 3)
        assert b.z_score == pytest.approx(3.5355, abs=1e-3)

    def test_accepts_raw_dates(self):
        dates = [BASE, BASE, BASE, BASE + timedelta(days=1)]
        bursts = detect_bursts(dates, window_days=1, step_days=1, min_count=3)
        assert bursts == []  # first window can never be a burst


def mk_entity(doc, chunk, dim, value, eid):
    return ExtractedEntity(
        entity_id=eid, doc_id=doc, chunk_index=chunk, dimension=dim,
        surface=eid, doc_span=(0, 1), value=value, confidence=0.9,
    )


def result_with(doc, chunk_table):
    entities = []
    for chunk, items in chunk_table.items():
        for i, (dim, value) in enumerate(items):
            entities.append(mk_entity(doc, chunk, dim, value, f"{doc}:{chunk}:{i}"))
    return ExtractionResult(doc_id=doc, entities=entities)


PERTH = GeoValue(name="Perth", resolved_name="Perth", lat=-31.95, lon=115.86,
                 hierarchy={"country": "AU"}, resolution_level="exact",
                 provider="gazetteer")
UNRESOLVED = GeoValue(name="Atlantis")


class TestBuildEvents:
    def test_cross_product_and_links(self):
        result = result_with("d1", {
            0: [
                ("temporal", parse_iso("2024-04-01")),
                ("temporal", parse_iso("2024-04-02")),
                ("spatial", PERTH),
                ("disease", CategoryValue("measles")),
            ],
        })
        events, excluded = build_events([result])
        assert len(events) == 2
        assert excluded == 0
        assert all(e.geo.resolved_name == "Perth" for e in events)
        assert events[0].linked == (("disease", "measles", "d1:0:3"),)

    def test_exclusions_counted(self):
        result = result_with("d1", {
            0: [
                ("temporal", parse_iso("2024-04")),  # month granularity: excluded
                ("spatial", UNRESOLVED),             # unresolved: excluded
                ("temporal", parse_iso("2024-04-05")),
                ("spatial", PERTH),
            ],
        })
        events, excluded = build_events([result])
        assert len(events) == 1
        assert excluded == 2

    def test_interval_contributes_start(self):
        result = result_with("d1", {
            0: [("temporal", parse_iso("2024-04-03/2024-04-06")), ("spatial", PERTH)],
        })
        events, _ = build_events([result])
        assert events[0].date == date(2024, 4, 3)


class TestCooccurrence:
    def test_triangle(self):
        result = result_with("d1", {
            0: [
                ("disease", CategoryValue("measles")),
                ("spatial", PERTH),
                ("temporal", parse_iso("2024-04-01")),
            ],
        })
        graph = cooccurrence_graph([result])
        assert len(graph.nodes) == 3
        assert len(graph.edges) == 3
        assert all(e.weight == 1 for e in graph.edges)
        assert all(e.source < e.target for e in graph.edges)

    def test_weight_counts_chunks(self):
        result = result_with("d1", {
            0: [("disease", CategoryValue("measles")), ("spatial", PERTH)],
            1: [("disease", CategoryValue("measles")), ("spatial", PERTH)],
        })
        graph = cooccurrence_graph([result])
        (edge,) = graph.edges
        assert edge.weight == 2
        assert all(n.frequency == 2 for n in graph.nodes)

    def test_isolated_node_retained(self):
        result = result_with("d1", {
            0: [("disease", CategoryValue("measles"))],
        })
        graph = cooccurrence_graph([result])
        assert len(graph.nodes) == 1 and graph.edges == ()

    def test_empty(self):
        graph = cooccurrence_graph([])
        assert graph.nodes == () and graph.edges == ()

    def test_duplicate_mentions_in_chunk_count_once(self):
        result = result_with("d1", {
            0: [("disease", CategoryValue("measles")),
                ("disease", CategoryValue("measles")),
                ("spatial", PERTH)],
        })
        graph = cooccurrence_graph([result])
        (edge,) = graph.edges
        assert edge.weight == 1


class TestDimensionBreakdown:
    def test_counts_and_ordering(self):
        result = result_with("d1", {
            0: [("disease", CategoryValue("measles")),
                ("disease", CategoryValue("measles")),
                ("disease", CategoryValue("influenza")),
                ("disease", CategoryValue("dengue"))],
        })
        rows = dimension_breakdown(result.entities)
        assert rows[0].total == 4
        # descending count, ties broken lexicographically
        assert rows[0].values == (("measles", 2), ("dengue", 1), ("influenza", 1))

    def test_required_dimensions_first_with_schema(self):
        schema = parse_schema(
            """
dimensions:
  - name: temporal
    kind: normalized_temporal
  - name: spatial
    kind: geocoded_spatial
  - name: disease
    kind: categorical
    vocabulary: [measles]
    required: true
"""
        )
        result = result_with("d1", {
            0: [("temporal", parse_iso("2024-04-01")),
                ("disease", CategoryValue("measles"))],
        })
        rows = dimension_breakdown(result.entities, schema)
        assert [r.dimension for r in rows] == ["disease", "temporal"]

    def test_single_entity(self):
        result = result_with("d1", {0: [("disease", CategoryValue("measles"))]})
        rows = dimension_breakdown(result.entities)
        assert rows == [type(rows[0])(dimension="disease", total=1,
                                      values=(("measles", 1),))]

    def test_empty(self):
        assert dimension_breakdown([]) == []
