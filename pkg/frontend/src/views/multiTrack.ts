import type { FilteredModel } from "../filters.js";
import type { Bundle } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 800;
const LANE = 36;
const PAD_X = 140;

function dayNumber(date: string): number {
  return Date.parse(date + "T00:00:00Z") / 86400000;
}

/** Events on horizontal lanes, one lane per value of the schema's first
 * categorical dimension (events without that attribute share a lane). */
export function renderMultiTrack(
  container: HTMLElement,
  model: FilteredModel,
  bundle: Bundle,
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
  const trackDim = bundle.schema.dimensions.find((d) => d.kind === "categorical");

  const trackOf = (eventLinked: { dimension: string; value: string }[]): string => {
    if (!trackDim) return "(all events)";
    const link = eventLinked.find((l) => l.dimension === trackDim.name);
    return link ? link.value : "(uncategorised)";
  };

  const tracks = new Map<string, typeof model.events>();
  for (const event of model.events) {
    const track = trackOf(event.linked);
    if (!tracks.has(track)) tracks.set(track, []);
    tracks.get(track)!.push(event);
  }
  const names = [...tracks.keys()].sort();

  const days = model.events.map((e) => dayNumber(e.date));
  const dayMin = Math.min(...days);
  const daySpan = Math.max(Math.max(...days) - dayMin, 1);
  const x = (date: string) =>
    PAD_X + ((dayNumber(date) - dayMin) / daySpan) * (WIDTH - PAD_X - 30);

  const height = names.length * LANE + 40;
  const svg = doc.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${height}`);
  svg.setAttribute("class", "timeline-svg");

  names.forEach((name, i) => {
    const cy = 24 + i * LANE;
    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("x", "8");
    label.setAttribute("y", String(cy + 4));
    label.setAttribute("class", "track-label");
    label.textContent = name;
    svg.appendChild(label);

    const axis = doc.createElementNS(SVG_NS, "line");
    axis.setAttribute("x1", String(PAD_X));
    axis.setAttribute("x2", String(WIDTH - 30));
    axis.setAttribute("y1", String(cy));
    axis.setAttribute("y2", String(cy));
    axis.setAttribute("class", "track-axis");
    svg.appendChild(axis);

    for (const event of tracks.get(name)!) {
      const dot = doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x(event.date)));
      dot.setAttribute("cy", String(cy));
      dot.setAttribute("r", "5");
      dot.setAttribute("class", "track-event");
      dot.setAttribute("data-event-id", String(event.event_id));
      const title = doc.createElementNS(SVG_NS, "title");
      title.textContent = `${event.date}: ${event.place}`;
      dot.appendChild(title);
      svg.appendChild(dot);
    }
  });

  container.appendChild(svg);
}
