import type { FilteredModel } from "../filters.js";

/** Frequency bars per dimension over the filtered entities. */
export function renderBreakdown(container: HTMLElement, model: FilteredModel): void {
  container.textContent = "";
  const doc = container.ownerDocument;
  if (!model.breakdown.length) {
    const empty = doc.createElement("div");
    empty.className = "zero-state";
    empty.textContent = "No entities match the current filters.";
    container.appendChild(empty);
    return;
  }
  const max = Math.max(
    ...model.breakdown.flatMap((row) => row.values.map((v) => v.count)),
    1,
  );
  for (const row of model.breakdown) {
    const section = doc.createElement("section");
    section.className = "breakdown-dimension";
    const heading = doc.createElement("h3");
    heading.textContent = `${row.dimension} (${row.total})`;
    section.appendChild(heading);
    for (const { value, count } of row.values) {
      const line = doc.createElement("div");
      line.className = "breakdown-row";
      const bar = doc.createElement("div");
      bar.className = "breakdown-bar";
      bar.style.width = `${(count / max) * 100}%`;
      const label = doc.createElement("span");
      label.className = "breakdown-label";
      label.textContent = `${value} — ${count}`;
      line.appendChild(bar);
      line.appendChild(label);
      section.appendChild(line);
    }
    container.appendChild(section);
  }
}
