import { applyFilters, canonicalValue, initialFilters } from "./filters.js";
import type { FilterState, FilteredModel } from "./filters.js";
import { TAB_LABELS, TABS } from "./types.js";
import type { Bundle, TabId } from "./types.js";
import { validateBundle } from "./validate.js";
import { renderBasicTimeline } from "./views/basicTimeline.js";
import { renderBreakdown } from "./views/breakdown.js";
import { renderMap } from "./views/map.js";
import { renderMultiTrack } from "./views/multiTrack.js";
import { renderNetwork } from "./views/network.js";

/** The tabbed dashboard shell.
 *
 * All five view panels re-render on every state change so their headers
 * always carry the same entity count, and the DOM API below doubles as the
 * scripted-interaction surface the tests drive.
 */
export class Dashboard {
  readonly root: HTMLElement;
  bundle: Bundle | null = null;
  state: FilterState = {
    from: null, to: null, dimensions: {}, categories: {}, cluster: null,
  };
  activeTab: TabId = "map";
  networkExpanded = false;

  private banner: HTMLElement;
  private tabBar: HTMLElement;
  private filterBar: HTMLElement;
  private panels = new Map<TabId, { section: HTMLElement; count: HTMLElement; body: HTMLElement }>();
  private sidebar: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
    const doc = root.ownerDocument;
    root.textContent = "";

    this.banner = doc.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    root.appendChild(this.banner);

    this.tabBar = doc.createElement("nav");
    this.tabBar.className = "tab-bar";
    root.appendChild(this.tabBar);

    this.filterBar = doc.createElement("div");
    this.filterBar.className = "filter-bar";
    root.appendChild(this.filterBar);

    const main = doc.createElement("div");
    main.className = "dashboard-main";
    root.appendChild(main);

    const views = doc.createElement("div");
    views.className = "views";
    main.appendChild(views);

    for (const tab of TABS) {
      const section = doc.createElement("section");
      section.className = "view-panel";
      section.dataset.tab = tab;
      const header = doc.createElement("header");
      const title = doc.createElement("h2");
      title.textContent = TAB_LABELS[tab];
      const count = doc.createElement("span");
      count.className = "view-count";
      header.appendChild(title);
      header.appendChild(count);
      const body = doc.createElement("div");
      body.className = "view-body";
      section.appendChild(header);
      section.appendChild(body);
      views.appendChild(section);
      this.panels.set(tab, { section, count, body });

      const button = doc.createElement("button");
      button.className = "tab-button";
      button.dataset.tab = tab;
      button.textContent = TAB_LABELS[tab];
      button.addEventListener("click", () => this.setTab(tab));
      this.tabBar.appendChild(button);
    }

    this.sidebar = doc.createElement("aside");
    this.sidebar.className = "analytics-sidebar";
    main.appendChild(this.sidebar);
  }

  /** Validate and adopt a parsed bundle; invalid input raises the banner
   * (naming the failing field) and leaves the previous state alone. */
  loadBundle(raw: unknown): boolean {
    const result = validateBundle(raw);
    if (!result.ok) {
      this.banner.hidden = false;
      this.banner.textContent = `Could not load bundle — ${result.error}`;
      return false;
    }
    this.banner.hidden = true;
    this.banner.textContent = "";
    this.bundle = result.bundle;
    this.state = initialFilters(result.bundle);
    this.networkExpanded = false;
    this.renderFilterControls();
    this.refresh();
    return true;
  }

  showError(message: string): void {
    this.banner.hidden = false;
    this.banner.textContent = message;
  }

  setTab(tab: TabId): void {
    this.activeTab = tab;
    this.refresh();
  }

  setTimeRange(from: string | null, to: string | null): void {
    this.state.from = from;
    this.state.to = to;
    this.refresh();
  }

  toggleDimension(name: string): void {
    this.state.dimensions[name] = this.state.dimensions[name] === false;
    this.refresh();
  }

  toggleCategory(dimension: string, value: string): void {
    const selected = this.state.categories[dimension] ?? [];
    this.state.categories[dimension] = selected.includes(value)
      ? selected.filter((v) => v !== value)
      : [...selected, value];
    this.refresh();
  }

  selectCluster(id: number | null): void {
    this.state.cluster = id;
    this.refresh();
  }

  clearFilters(): void {
    if (this.bundle) this.state = initialFilters(this.bundle);
    this.refresh();
  }

  model(): FilteredModel | null {
    return this.bundle ? applyFilters(this.bundle, this.state) : null;
  }

  /** Entity counts as shown in each view header (should all agree). */
  headerCounts(): number[] {
    return [...this.panels.values()].map((p) =>
      parseInt(p.count.textContent || "-1", 10),
    );
  }

  refresh(): void {
    if (!this.bundle) return;
    const model = applyFilters(this.bundle, this.state);

    for (const button of this.tabBar.querySelectorAll<HTMLButtonElement>(".tab-button")) {
      button.classList.toggle("active", button.dataset.tab === this.activeTab);
    }
    for (const [tab, panel] of this.panels) {
      panel.count.textContent = `${model.count} entities`;
      panel.section.classList.toggle("active", tab === this.activeTab);
    }

    const panels = this.panels;
    renderMap(panels.get("map")!.body, model, this.state.cluster,
              (id) => this.selectCluster(id));
    renderMultiTrack(panels.get("multi_track_timeline")!.body, model, this.bundle);
    renderNetwork(panels.get("entity_network")!.body, model, this.networkExpanded,
                  () => { this.networkExpanded = !this.networkExpanded; this.refresh(); });
    renderBasicTimeline(panels.get("basic_timeline")!.body, model);
    renderBreakdown(panels.get("dimension_breakdown")!.body, model);
    this.renderSidebar(model);
  }

  private renderFilterControls(): void {
    const doc = this.root.ownerDocument;
    const bundle = this.bundle!;
    this.filterBar.textContent = "";

    const dates = bundle.events.map((e) => e.date).sort();
    const from = doc.createElement("input");
    from.type = "date";
    from.className = "filter-from";
    if (dates.length) from.value = dates[0];
    const to = doc.createElement("input");
    to.type = "date";
    to.className = "filter-to";
    if (dates.length) to.value = dates[dates.length - 1];
    const applyRange = doc.createElement("button");
    applyRange.textContent = "Apply time range";
    applyRange.addEventListener("click", () =>
      this.setTimeRange(from.value || null, to.value || null),
    );
    this.filterBar.append("Time: ", from, " to ", to, applyRange);

    for (const dim of bundle.schema.dimensions) {
      const label = doc.createElement("label");
      label.className = "dimension-toggle";
      const box = doc.createElement("input");
      box.type = "checkbox";
      box.checked = true;
      box.dataset.dimension = dim.name;
      box.addEventListener("change", () => this.toggleDimension(dim.name));
      label.appendChild(box);
      label.append(dim.name);
      this.filterBar.appendChild(label);
    }

    for (const dim of bundle.schema.dimensions) {
      if (dim.kind !== "categorical" || !dim.vocabulary) continue;
      const group = doc.createElement("span");
      group.className = "category-chips";
      group.append(`${dim.name}: `);
      for (const value of dim.vocabulary) {
        const chip = doc.createElement("button");
        chip.className = "category-chip";
        chip.dataset.dimension = dim.name;
        chip.dataset.value = value;
        chip.textContent = value;
        chip.addEventListener("click", () => {
          chip.classList.toggle("selected");
          this.toggleCategory(dim.name, value);
        });
        group.appendChild(chip);
      }
      this.filterBar.appendChild(group);
    }

    const clear = doc.createElement("button");
    clear.className = "clear-filters";
    clear.textContent = "Clear filters";
    clear.addEventListener("click", () => {
      this.renderFilterControls();
      this.clearFilters();
    });
    this.filterBar.appendChild(clear);
  }

  private renderSidebar(model: FilteredModel): void {
    const doc = this.root.ownerDocument;
    const bundle = this.bundle!;
    this.sidebar.textContent = "";

    const panel = (title: string): HTMLElement => {
      const section = doc.createElement("section");
      section.className = "analytics-panel";
      const heading = doc.createElement("h3");
      heading.textContent = title;
      section.appendChild(heading);
      this.sidebar.appendChild(section);
      return section;
    };

    const quality = panel("Quality metrics");
    const meanConfidence = model.entities.length
      ? model.entities.reduce((acc, e) => acc + e.confidence, 0) / model.entities.length
      : 0;
    const reflected = model.entities.filter((e) => e.reflection);
    const lines = [
      `${model.count} entities in view (corpus: ${bundle.stats.entities} kept, ` +
        `${bundle.stats.filtered} filtered)`,
      `${bundle.stats.documents} documents, ${bundle.stats.chunks} chunks`,
      `mean confidence ${meanConfidence.toFixed(2)}`,
      `${reflected.length} entities carry reflection scores`,
    ];
    for (const text of lines) {
      const p = doc.createElement("p");
      p.textContent = text;
      quality.appendChild(p);
    }

    const bursts = panel("Burst detection");
    if (!bundle.bursts.length) {
      const p = doc.createElement("p");
      p.textContent = "No burst windows in this corpus.";
      bursts.appendChild(p);
    }
    for (const burst of bundle.bursts) {
      const p = doc.createElement("p");
      p.className = "burst-row";
      p.textContent =
        `${burst.start} to ${burst.end}: ${burst.observed} events ` +
        `(baseline ${burst.baseline_mean.toFixed(2)})`;
      bursts.appendChild(p);
    }

    const temporal = panel("Temporal analytics");
    const byMonth = new Map<string, number>();
    for (const event of model.events) {
      const month = event.date.slice(0, 7);
      byMonth.set(month, (byMonth.get(month) ?? 0) + 1);
    }
    for (const [month, count] of [...byMonth.entries()].sort()) {
      const p = doc.createElement("p");
      p.textContent = `${month}: ${count} events`;
      temporal.appendChild(p);
    }
    if (!byMonth.size) {
      const p = doc.createElement("p");
      p.textContent = "No dated events in view.";
      temporal.appendChild(p);
    }

    const spatial = panel("Spatial visualization");
    const byLevel = new Map<string, number>();
    for (const entity of model.entities) {
      if (entity.value.type !== "geo") continue;
      const level = entity.value.resolution_level ?? "unresolved";
      byLevel.set(level, (byLevel.get(level) ?? 0) + 1);
    }
    for (const [level, count] of [...byLevel.entries()].sort()) {
      const p = doc.createElement("p");
      p.textContent = `${level}: ${count}`;
      spatial.appendChild(p);
    }
    const places = new Set(
      model.entities
        .filter((e) => e.value.type === "geo")
        .map((e) => canonicalValue(e)),
    );
    const p = doc.createElement("p");
    p.textContent = `${places.size} distinct places, ${model.clusters.length} clusters in view`;
    spatial.appendChild(p);
  }
}
