import { Dashboard } from "./app.js";

/** Entry point: mount the dashboard and load a bundle from the `?bundle=`
 * URL parameter or the file picker. Static hosting is all it needs. */
export function boot(root: HTMLElement): Dashboard {
  const doc = root.ownerDocument;
  const dashboard = new Dashboard(root);

  const picker = doc.createElement("input");
  picker.type = "file";
  picker.accept = ".json,application/json";
  picker.className = "bundle-picker";
  picker.addEventListener("change", () => {
    const file = picker.files && picker.files[0];
    if (!file) return;
    file.text().then((text) => {
      try {
        dashboard.loadBundle(JSON.parse(text));
      } catch (err) {
        dashboard.showError(`Could not parse ${file.name}: ${err}`);
      }
    });
  });
  root.insertBefore(picker, root.firstChild);

  const params = new URLSearchParams(doc.defaultView?.location.search ?? "");
  const url = params.get("bundle");
  if (url) {
    fetch(url)
      .then((resp) => {
        if (!resp.ok) throw new Error(`HTTP ${resp.status}`);
        return resp.json();
      })
      .then((raw) => dashboard.loadBundle(raw))
      .catch((err) => dashboard.showError(`Could not fetch ${url}: ${err}`));
  }
  return dashboard;
}

if (typeof document !== "undefined" && document.getElementById("dashboard-root")) {
  boot(document.getElementById("dashboard-root")!);
}
