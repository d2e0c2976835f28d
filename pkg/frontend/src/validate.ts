import type { Bundle } from "./types.js";

export type ValidationResult =
  | { ok: true; bundle: Bundle }
  | { ok: false; error: string };

function fail(field: string, detail: string): ValidationResult {
  return { ok: false, error: `bundle field "${field}": ${detail}` };
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

const TOP_LEVEL_ARRAYS = [
  "entities",
  "events",
  "clusters",
  "noise_event_ids",
  "bursts",
  "dimension_breakdown",
] as const;

/** Structural validation mirroring bundle.schema.json; returns the first
 * failing field so the error banner can name it. */
export function validateBundle(raw: unknown): ValidationResult {
  if (!isRecord(raw)) return fail("(root)", "not an object");
  if (raw.bundle_version !== 1) {
    return fail("bundle_version", `expected 1, got ${JSON.stringify(raw.bundle_version)}`);
  }
  if (typeof raw.manifest_digest !== "string") {
    return fail("manifest_digest", "missing or not a string");
  }
  if (!isRecord(raw.schema) || !Array.isArray(raw.schema.dimensions)) {
    return fail("schema.dimensions", "missing dimension list");
  }
  for (const name of TOP_LEVEL_ARRAYS) {
    if (!Array.isArray(raw[name])) return fail(name, "missing or not an array");
  }
  if (!isRecord(raw.stats)) return fail("stats", "missing or not an object");
  if (!isRecord(raw.cooccurrence)) return fail("cooccurrence", "missing or not an object");
  const cooc = raw.cooccurrence as Record<string, unknown>;
  if (!Array.isArray(cooc.nodes) || !Array.isArray(cooc.edges)) {
    return fail("cooccurrence", "needs nodes and edges arrays");
  }

  const entities = raw.entities as unknown[];
  for (let i = 0; i < entities.length; i++) {
    const e = entities[i];
    if (!isRecord(e)) return fail(`entities[${i}]`, "not an object");
    for (const key of ["entity_id", "doc_id", "dimension", "surface"]) {
      if (typeof e[key] !== "string") return fail(`entities[${i}].${key}`, "missing string");
    }
    if (typeof e.chunk_index !== "number") {
      return fail(`entities[${i}].chunk_index`, "missing number");
    }
    if (!isRecord(e.value) || typeof e.value.type !== "string") {
      return fail(`entities[${i}].value`, "missing typed value object");
    }
    if (typeof e.confidence !== "number" || e.confidence < 0 || e.confidence > 1) {
      return fail(`entities[${i}].confidence`, "not a number in [0, 1]");
    }
  }

  const events = raw.events as unknown[];
  for (let i = 0; i < events.length; i++) {
    const ev = events[i];
    if (!isRecord(ev)) return fail(`events[${i}]`, "not an object");
    if (typeof ev.event_id !== "number") return fail(`events[${i}].event_id`, "missing number");
    if (typeof ev.date !== "string" || !/^\d{4}-\d{2}-\d{2}$/.test(ev.date)) {
      return fail(`events[${i}].date`, "not a YYYY-MM-DD string");
    }
    if (typeof ev.lat !== "number" || typeof ev.lon !== "number") {
      return fail(`events[${i}]`, "missing coordinates");
    }
  }

  const clusters = raw.clusters as unknown[];
  for (let i = 0; i < clusters.length; i++) {
    const c = clusters[i];
    if (!isRecord(c) || typeof c.cluster_id !== "number" ||
        !Array.isArray(c.member_event_ids)) {
      return fail(`clusters[${i}]`, "needs cluster_id and member_event_ids");
    }
  }

  return { ok: true, bundle: raw as unknown as Bundle };
}
