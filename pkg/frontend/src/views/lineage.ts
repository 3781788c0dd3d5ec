// Lineage explorer: rendered dependency sub-graph with a depth control;
// clicking a node re-roots the query.

import { getJson } from "../api.js";
import { clear, el, errorBanner } from "../dom.js";
import { renderSvg } from "../graph.js";
import type { LineageGraph } from "../types.js";

export async function renderLineage(
  root: HTMLElement,
  object: string,
  depth = 3,
  direction: "downstream" | "upstream" = "downstream",
): Promise<void> {
  clear(root);
  root.append(
    el("a", { href: "#/catalog", class: "back", text: "← catalog" }),
    el("h1", { text: `Lineage of ${object}` }),
  );
  const controls = el("div", { class: "lineage-controls" });
  const depthSlider = el("input", {
    type: "range", min: "1", max: "8", value: String(depth), id: "depth-slider",
  });
  const depthLabel = el("span", { text: `depth ${depth}` });
  depthSlider.addEventListener("change", () => {
    window.location.hash =
      `#/lineage/${encodeURIComponent(object)}?depth=${depthSlider.value}&direction=${direction}`;
  });
  const flip = el("button", {
    text: direction === "downstream" ? "show upstream" : "show downstream",
  });
  flip.addEventListener("click", () => {
    const other = direction === "downstream" ? "upstream" : "downstream";
    window.location.hash =
      `#/lineage/${encodeURIComponent(object)}?depth=${depth}&direction=${other}`;
  });
  controls.append(depthLabel, depthSlider, flip);
  root.append(controls);
  const panel = el("div", { class: "lineage-panel", id: "lineage-panel" });
  root.append(panel);
  try {
    const graph = await getJson<LineageGraph>("/lineage", {
      object, depth, direction,
    });
    if (!graph.nodes.length) {
      panel.append(el("p", { class: "empty", text: "object not found in the lineage window" }));
      return;
    }
    panel.append(
      renderSvg(graph, (id) => {
        window.location.hash = `#/lineage/${encodeURIComponent(id)}?depth=${depth}&direction=${direction}`;
      }),
    );
    const legend = el("p", {
      class: "lineage-summary",
      text: `${graph.nodes.length} nodes, ${graph.edges.length} edges (${direction}, depth ${depth})`,
    });
    panel.append(legend);
  } catch (err) {
    panel.append(errorBanner(String(err), () => renderLineage(root, object, depth, direction)));
  }
}
