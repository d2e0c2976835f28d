import { canonicalValue } from "../filters.js";
import type { FilteredModel } from "../filters.js";

/** Chronological list of the filtered temporal entities. */
export function renderBasicTimeline(container: HTMLElement, model: FilteredModel): void {
  container.textContent = "";
  const doc = container.ownerDocument;
  const temporal = model.entities
    .filter((e) => e.value.type === "temporal")
    .sort((a, b) => {
      const av = canonicalValue(a);
      const bv = canonicalValue(b);
      return av < bv ? -1 : av > bv ? 1 : a.entity_id < b.entity_id ? -1 : 1;
    });
  if (!temporal.length) {
    const empty = doc.createElement("div");
    empty.className = "zero-state";
    empty.textContent = "No temporal entities match the current filters.";
    container.appendChild(empty);
    return;
  }
  const list = doc.createElement("ol");
  list.className = "basic-timeline";
  for (const entity of temporal) {
    const item = doc.createElement("li");
    const value = doc.createElement("span");
    value.className = "timeline-value";
    value.textContent = canonicalValue(entity);
    const surface = doc.createElement("span");
    surface.className = "timeline-surface";
    surface.textContent =
      ` "${entity.surface}" (${entity.doc_id} chunk ${entity.chunk_index}` +
      `${entity.value.relative ? ", resolved from a relative expression" : ""})`;
    item.appendChild(value);
    item.appendChild(surface);
    list.appendChild(item);
  }
  container.appendChild(list);
}
