import type { FilteredModel } from "../filters.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 800;
const HEIGHT = 480;
const PAD = 40;

/** Offline equirectangular map: graticule basemap, one dot per event, and
 * one circle per precomputed cluster (sized by member count). No tiles, no
 * network, no client-side re-clustering. */
export function renderMap(
  container: HTMLElement,
  model: FilteredModel,
  selectedCluster: number | null,
  onSelectCluster: (id: number | null) => void,
): void {
  container.textContent = "";
  if (!model.events.length) {
    const empty = container.ownerDocument.createElement("div");
    empty.className = "zero-state";
    empty.textContent = "No events match the current filters.";
    container.appendChild(empty);
    return;
  }

  const doc = container.ownerDocument;
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "map-svg");

  const lats = model.events.map((e) => e.lat);
  const lons = model.events.map((e) => e.lon);
  const latMin = Math.min(...lats) - 1;
  const latMax = Math.max(...lats) + 1;
  const lonMin = Math.min(...lons) - 1;
  const lonMax = Math.max(...lons) + 1;
  const x = (lon: number) =>
    PAD + ((lon - lonMin) / Math.max(lonMax - lonMin, 1e-9)) * (WIDTH - 2 * PAD);
  const y = (lat: number) =>
    HEIGHT - PAD - ((lat - latMin) / Math.max(latMax - latMin, 1e-9)) * (HEIGHT - 2 * PAD);

  // graticule fallback basemap: one line per 10 degrees
  for (let lon = Math.ceil(lonMin / 10) * 10; lon <= lonMax; lon += 10) {
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(x(lon)));
    line.setAttribute("x2", String(x(lon)));
    line.setAttribute("y1", String(y(latMax)));
    line.setAttribute("y2", String(y(latMin)));
    line.setAttribute("class", "graticule");
    svg.appendChild(line);
  }
  for (let lat = Math.ceil(latMin / 10) * 10; lat <= latMax; lat += 10) {
    const line = doc.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(x(lonMin)));
    line.setAttribute("x2", String(x(lonMax)));
    line.setAttribute("y1", String(y(lat)));
    line.setAttribute("y2", String(y(lat)));
    line.setAttribute("class", "graticule");
    svg.appendChild(line);
  }

  for (const cluster of model.clusters) {
    const circle = doc.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(x(cluster.centroid_lon)));
    circle.setAttribute("cy", String(y(cluster.centroid_lat)));
    circle.setAttribute("r", String(10 + cluster.size * 4));
    circle.setAttribute(
      "class",
      cluster.cluster_id === selectedCluster ? "cluster selected" : "cluster",
    );
    circle.setAttribute("data-cluster-id", String(cluster.cluster_id));
    circle.addEventListener("click", () => {
      onSelectCluster(cluster.cluster_id === selectedCluster ? null : cluster.cluster_id);
    });
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent =
      `cluster ${cluster.cluster_id}: ${cluster.size} events, ` +
      `${cluster.start} to ${cluster.end}`;
    circle.appendChild(title);
    svg.appendChild(circle);
  }

  for (const event of model.events) {
    const dot = doc.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(x(event.lon)));
    dot.setAttribute("cy", String(y(event.lat)));
    dot.setAttribute("r", "3.5");
    dot.setAttribute("class", "event-dot");
    dot.setAttribute("data-event-id", String(event.event_id));
    const title = doc.createElementNS(SVG_NS, "title");
    title.textContent = `${event.place} — ${event.date}`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }

  container.appendChild(svg);
}
