import type {
  BreakdownRow,
  Bundle,
  Cluster,
  CoocEdge,
  CoocNode,
  Entity,
  StEvent,
} from "./types.js";

export interface FilterState {
  from: string | null; // inclusive YYYY-MM-DD bounds
  to: string | null;
  dimensions: Record<string, boolean>;
  categories: Record<string, string[]>; // empty list = no restriction
  cluster: number | null;
}

export interface FilteredModel {
  entities: Entity[];
  events: StEvent[];
  clusters: Cluster[];
  nodes: CoocNode[];
  edges: CoocEdge[];
  breakdown: BreakdownRow[];
  count: number; // the number every view header shows
}

export function initialFilters(bundle: Bundle): FilterState {
  const dimensions: Record<string, boolean> = {};
  for (const dim of bundle.schema.dimensions) dimensions[dim.name] = true;
  return { from: null, to: null, dimensions, categories: {}, cluster: null };
}

export function canonicalValue(entity: Entity): string {
  const v = entity.value;
  if (v.type === "temporal") return v.iso ?? "";
  if (v.type === "geo") return v.resolved_name ?? v.name ?? entity.surface;
  if (v.type === "category") return v.label ?? "";
  const attrs = v.attributes ?? {};
  const sorted = Object.keys(attrs).sort().map((k) => [k, attrs[k]]);
  return JSON.stringify(Object.fromEntries(sorted));
}

/** First day of the value's start instant, zero-padded to YYYY-MM-DD. */
export function isoToDate(iso: string): string | null {
  const start = iso.split("/")[0].split("T")[0];
  if (/^\d{4}-\d{2}-\d{2}$/.test(start)) return start;
  if (/^\d{4}-\d{2}$/.test(start)) return `${start}-01`;
  if (/^\d{4}$/.test(start)) return `${start}-01-01`;
  return null;
}

function chunkKey(docId: string, chunkIndex: number): string {
  return `${docId}#${chunkIndex}`;
}

/** Effective date used by the time filter: the entity's own date for
 * temporal entities, else the earliest temporal date in its chunk, else in
 * its document. Entities with no effective date pass only when no time
 * filter is active. */
export function effectiveDates(bundle: Bundle): Map<string, string | null> {
  const chunkEarliest = new Map<string, string>();
  const docEarliest = new Map<string, string>();
  for (const e of bundle.entities) {
    if (e.value.type !== "temporal") continue;
    const date = isoToDate(e.value.iso ?? "");
    if (!date) continue;
    const ck = chunkKey(e.doc_id, e.chunk_index);
    if (!chunkEarliest.has(ck) || date < chunkEarliest.get(ck)!) {
      chunkEarliest.set(ck, date);
    }
    if (!docEarliest.has(e.doc_id) || date < docEarliest.get(e.doc_id)!) {
      docEarliest.set(e.doc_id, date);
    }
  }
  const result = new Map<string, string | null>();
  for (const e of bundle.entities) {
    let date: string | null = null;
    if (e.value.type === "temporal") {
      date = isoToDate(e.value.iso ?? "");
    }
    if (!date) date = chunkEarliest.get(chunkKey(e.doc_id, e.chunk_index)) ?? null;
    if (!date) date = docEarliest.get(e.doc_id) ?? null;
    result.set(e.entity_id, date);
  }
  return result;
}

function clusterEntityIds(bundle: Bundle, clusterId: number): Set<string> {
  const cluster = bundle.clusters.find((c) => c.cluster_id === clusterId);
  const ids = new Set<string>();
  if (!cluster) return ids;
  const members = new Set(cluster.member_event_ids);
  for (const event of bundle.events) {
    if (!members.has(event.event_id)) continue;
    ids.add(event.temporal_entity_id);
    ids.add(event.spatial_entity_id);
    for (const link of event.linked) ids.add(link.entity_id);
  }
  return ids;
}

export function applyFilters(bundle: Bundle, state: FilterState): FilteredModel {
  const dates = effectiveDates(bundle);
  const timeActive = state.from !== null || state.to !== null;
  const clusterIds =
    state.cluster === null ? null : clusterEntityIds(bundle, state.cluster);

  const inRange = (date: string | null): boolean => {
    if (!timeActive) return true;
    if (!date) return false;
    if (state.from && date < state.from) return false;
    if (state.to && date > state.to) return false;
    return true;
  };

  const passes = (e: Entity): boolean => {
    if (state.dimensions[e.dimension] === false) return false;
    const selected = state.categories[e.dimension];
    if (selected && selected.length && !selected.includes(canonicalValue(e))) {
      return false;
    }
    if (!inRange(dates.get(e.entity_id) ?? null)) return false;
    if (clusterIds && !clusterIds.has(e.entity_id)) return false;
    return true;
  };

  const entities = bundle.entities.filter(passes);
  const passing = new Set(entities.map((e) => e.entity_id));

  const memberOk = (event: StEvent): boolean => {
    if (state.cluster !== null) {
      const cluster = bundle.clusters.find((c) => c.cluster_id === state.cluster);
      if (!cluster || !cluster.member_event_ids.includes(event.event_id)) return false;
    }
    return (
      passing.has(event.temporal_entity_id) &&
      passing.has(event.spatial_entity_id) &&
      inRange(event.date)
    );
  };
  const events = bundle.events.filter(memberOk);
  const visibleEvents = new Set(events.map((e) => e.event_id));
  const clusters = bundle.clusters.filter((c) =>
    c.member_event_ids.some((id) => visibleEvents.has(id)),
  );

  const liveValues = new Set(entities.map((e) => `${e.dimension}:${canonicalValue(e)}`));
  const nodes = bundle.cooccurrence.nodes.filter((n) => liveValues.has(n.id));
  const nodeIds = new Set(nodes.map((n) => n.id));
  const edges = bundle.cooccurrence.edges.filter(
    (e) => nodeIds.has(e.source) && nodeIds.has(e.target),
  );

  const byDim = new Map<string, Map<string, number>>();
  for (const e of entities) {
    const dim = byDim.get(e.dimension) ?? new Map<string, number>();
    const value = canonicalValue(e);
    dim.set(value, (dim.get(value) ?? 0) + 1);
    byDim.set(e.dimension, dim);
  }
  const order = bundle.dimension_breakdown.map((row) => row.dimension);
  for (const dim of byDim.keys()) if (!order.includes(dim)) order.push(dim);
  const breakdown: BreakdownRow[] = [];
  for (const dim of order) {
    const counts = byDim.get(dim);
    if (!counts) continue;
    const values = [...counts.entries()]
      .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
      .map(([value, count]) => ({ value, count }));
    breakdown.push({
      dimension: dim,
      total: values.reduce((acc, v) => acc + v.count, 0),
      values,
    });
  }

  return { entities, events, clusters, nodes, edges, breakdown, count: entities.length };
}
