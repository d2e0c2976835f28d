// Shapes mirror bundle.schema.json (bundle_version 1).

export interface DimensionDef {
  name: string;
  kind: "normalized_temporal" | "geocoded_spatial" | "categorical" | "structured";
  description?: string;
  vocabulary?: string[];
  hierarchy?: string[];
  attributes?: Record<string, string>[];
  required?: boolean;
}

export interface EntityValue {
  type: "temporal" | "geo" | "category" | "structured";
  iso?: string;
  kind?: string;
  granularity?: string;
  relative?: boolean;
  original_expression?: string;
  name?: string;
  resolved_name?: string | null;
  lat?: number | null;
  lon?: number | null;
  hierarchy?: Record<string, string>;
  resolution_level?: string;
  provider?: string | null;
  label?: string;
  attributes?: Record<string, unknown>;
}

export interface Entity {
  entity_id: string;
  doc_id: string;
  chunk_index: number;
  dimension: string;
  surface: string;
  doc_span: [number, number];
  value: EntityValue;
  confidence: number;
  reflection: { relevance: number; accuracy: number; consistency: number } | null;
  provenance: "kept";
}

export interface StEvent {
  event_id: number;
  doc_id: string;
  chunk_index: number;
  date: string; // YYYY-MM-DD
  iso: string;
  lat: number;
  lon: number;
  place: string;
  linked: { dimension: string; value: string; entity_id: string }[];
  temporal_entity_id: string;
  spatial_entity_id: string;
}

export interface Cluster {
  cluster_id: number;
  member_event_ids: number[];
  centroid_lat: number;
  centroid_lon: number;
  start: string;
  end: string;
  size: number;
}

export interface Burst {
  start: string;
  end: string;
  observed: number;
  baseline_mean: number;
  baseline_std: number;
  z_score: number | null;
}

export interface CoocNode {
  id: string;
  dimension: string;
  value: string;
  frequency: number;
}

export interface CoocEdge {
  source: string;
  target: string;
  weight: number;
}

export interface BreakdownRow {
  dimension: string;
  total: number;
  values: { value: string; count: number }[];
}

export interface Bundle {
  bundle_version: 1;
  manifest_digest: string;
  schema: { version: string; dimensions: DimensionDef[] };
  entities: Entity[];
  stats: { documents: number; chunks: number; entities: number; filtered: number };
  events: StEvent[];
  excluded_entity_count: number;
  clusters: Cluster[];
  noise_event_ids: number[];
  bursts: Burst[];
  cooccurrence: { nodes: CoocNode[]; edges: CoocEdge[] };
  dimension_breakdown: BreakdownRow[];
}

export const TABS = [
  "map",
  "multi_track_timeline",
  "entity_network",
  "basic_timeline",
  "dimension_breakdown",
] as const;

export type TabId = (typeof TABS)[number];

export const TAB_LABELS: Record<TabId, string> = {
  map: "Map",
  multi_track_timeline: "Multi-Track Timeline",
  entity_network: "Entity Network",
  basic_timeline: "Basic Timeline",
  dimension_breakdown: "Dimension Breakdown",
};
