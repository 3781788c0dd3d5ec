// Hash router and shell. The API key is asked for once per browser session.

import { getApiKey, setApiKey } from "./api.js";
import { clear, el } from "./dom.js";
import { renderAccess } from "./views/access.js";
import { renderCatalog } from "./views/catalog.js";
import { renderLineage } from "./views/lineage.js";
import { renderProduct } from "./views/product.js";
import { renderSuggestions } from "./views/suggestions.js";

function renderLogin(root: HTMLElement): void {
  clear(root);
  const input = el("input", { type: "password", placeholder: "API key", id: "api-key-input" });
  const button = el("button", { text: "enter" });
  button.addEventListener("click", () => {
    setApiKey(input.value);
    window.location.hash = "#/catalog";
    void route();
  });
  root.append(
    el("h1", { text: "meshmart console" }),
    el("p", { text: "Paste a platform API key; it is held in session storage only." }),
    el("div", { class: "login" }, [input, button]),
  );
}

function navBar(): HTMLElement {
  return el("nav", {}, [
    el("a", { href: "#/catalog", text: "Catalog" }),
    el("a", { href: "#/suggestions", text: "Inbox" }),
    el("a", { href: "#/access", text: "Access" }),
  ]);
}

export async function route(): Promise<void> {
  const outlet = document.getElementById("app");
  if (!outlet) return;
  clear(outlet);
  if (!getApiKey()) {
    renderLogin(outlet);
    return;
  }
  outlet.append(navBar());
  const view = el("main", { id: "view" });
  outlet.append(view);
  const hash = window.location.hash || "#/catalog";
  const [path, queryString] = hash.slice(2).split("?");
  const segments = path.split("/");
  const params = new URLSearchParams(queryString ?? "");
  if (segments[0] === "catalog") {
    await renderCatalog(view, decodeURIComponent(segments[1] ?? ""));
  } else if (segments[0] === "product" && segments[1]) {
    await renderProduct(view, decodeURIComponent(segments[1]));
  } else if (segments[0] === "lineage" && segments[1]) {
    const depth = Number(params.get("depth") ?? "3");
    const direction = (params.get("direction") ?? "downstream") as "downstream" | "upstream";
    await renderLineage(view, decodeURIComponent(segments[1]), depth, direction);
  } else if (segments[0] === "suggestions") {
    await renderSuggestions(view);
  } else if (segments[0] === "access") {
    await renderAccess(view);
  } else {
    await renderCatalog(view, "");
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && document.getElementById("app")) {
  window.addEventListener("hashchange", () => void route());
  void route();
}
