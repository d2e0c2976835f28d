import type { FilteredModel } from "../filters.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 640;
const EDGE_CAP = 150; // initial render keeps the strongest edges legible

/** Co-occurrence network on a deterministic circular layout. The initial
 * render caps at the 150 highest-weight edges; the expand control shows
 * everything. */
export function renderNetwork(
  container: HTMLElement,
  model: FilteredModel,
  expanded: boolean,
  onToggleExpand: () => void,
): void {
  container.textContent = "";
  const doc = container.ownerDocument;
  if (!model.nodes.length) {
    const empty = doc.createElement("div");
    empty.className = "zero-state";
    empty.textContent = "No entities match the current filters.";
    container.appendChild(empty);
    return;
  }

  const edges = [...model.edges].sort((a, b) => b.weight - a.weight);
  const shown = expanded ? edges : edges.slice(0, EDGE_CAP);

  if (edges.length > EDGE_CAP) {
    const button = doc.createElement("button");
    button.className = "expand-edges";
    button.textContent = expanded
      ? `showing all ${edges.length} edges — show top ${EDGE_CAP}`
      : `showing top ${EDGE_CAP} of ${edges.length} edges — show all`;
    button.addEventListener("click", onToggleExpand);
    container.appendChild(button);
  }

  const center = SIZE / 2;
  const radius = center - 90;
  const position = new Map<string, { px: number; py: number }>();
  model.nodes.forEach((node, i) => {
    const angle = (2 * Math.PI * i) / model.nodes.length - Math.PI / 2;
    position.set(node.id, {
      px: center + radius * Math.cos(angle),
      py: center + radius * Math.sin(angle),
    });
  });

  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
  svg.setAttribute("class", "network-svg");

  for (const edge of shown) {
    const a = position.get(edge.source);
    const b = position.get(edge.target);
    if (!a || !b) continue;
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.px));
    line.setAttribute("y1", String(a.py));
    line.setAttribute("x2", String(b.px));
    line.setAttribute("y2", String(b.py));
    line.setAttribute("stroke-width", String(Math.min(1 + edge.weight, 6)));
    line.setAttribute("class", "network-edge");
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent = `${edge.source} — ${edge.target} (${edge.weight})`;
    line.appendChild(title);
    svg.appendChild(line);
  }

  for (const node of model.nodes) {
    const { px, py } = position.get(node.id)!;
    const dot = doc.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(px));
    dot.setAttribute("cy", String(py));
    dot.setAttribute("r", String(4 + Math.min(node.frequency, 10)));
    dot.setAttribute("class", `network-node dim-${node.dimension}`);
    dot.setAttribute("data-node-id", node.id);
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent = `${node.id} (in ${node.frequency} chunks)`;
    dot.appendChild(title);
    svg.appendChild(dot);

    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(px + (px >= center ? 10 : -10)));
    label.setAttribute("y", String(py + 4));
    label.setAttribute("text-anchor", px >= center ? "start" : "end");
    label.setAttribute("class", "network-label");
    label.textContent = node.value;
    svg.appendChild(label);
  }

  container.appendChild(svg);
}
