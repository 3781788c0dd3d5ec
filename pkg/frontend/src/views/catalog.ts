// Catalog browser: ranked cards with class badges, ratings, usage sparklines.

import { getJson } from "../api.js";
import { classBadge, clear, el, errorBanner, sparkline } from "../dom.js";
import type { CatalogEntry } from "../types.js";

export async function renderCatalog(root: HTMLElement, query = ""): Promise<void> {
  clear(root);
  const searchBox = el("input", {
    class: "search",
    type: "search",
    placeholder: "search data products…",
    value: query,
  });
  searchBox.addEventListener("change", () => {
    window.location.hash = `#/catalog/${encodeURIComponent(searchBox.value)}`;
  });
  const list = el("div", { class: "cards", id: "catalog-cards" });
  root.append(el("h1", { text: "Data product marketplace" }), searchBox, list);
  try {
    const entries = await getJson<CatalogEntry[]>("/catalog/search", query ? { q: query } : {});
    if (!entries.length) {
      list.append(el("p", { class: "empty", text: "no visible products" }));
      return;
    }
    for (const entry of entries) {
      const card = el("div", { class: "card", "data-address": entry.address }, [
        el("div", { class: "card-head" }, [
          el("a", {
            class: "card-title",
            href: `#/product/${encodeURIComponent(entry.address)}`,
            text: entry.address.split(".").slice(-1)[0],
          }),
          classBadge(entry.class),
        ]),
        el("div", { class: "card-meta" }, [
          el("span", { class: "rating", text: entry.rating === null ? "unrated" : `★ ${entry.rating.toFixed(1)}` }),
          sparkline(entry.usage),
          el("span", { class: "score", text: `score ${entry.score.toFixed(2)}` }),
        ]),
        el("p", { class: "card-desc", text: entry.description.slice(0, 140) }),
        el("div", { class: "tags" }, entry.tags.map((t) => el("span", { class: "tag", text: t }))),
      ]);
      list.append(card);
    }
  } catch (err) {
    list.append(errorBanner(String(err), () => renderCatalog(root, query)));
  }
}
