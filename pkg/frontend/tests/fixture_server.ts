// In-memory fixture server: replaces global fetch with handlers over
// mutable state, mirroring the documented /v1 REST semantics the UI uses.

import type { CatalogEntry, LineageGraph, ProductDetail, Suggestion } from "../src/types.js";

export interface FixtureState {
  catalog: CatalogEntry[];
  products: Record<string, ProductDetail>;
  suggestions: Suggestion[];
  lineage: LineageGraph;
  groups: unknown[];
  calls: { method: string; url: string; body?: unknown }[];
  failNextResolve?: boolean;
}

export function makeCatalog(count: number): CatalogEntry[] {
  const classes = ["Stable", "Investigable", "Internal"] as const;
  const entries: CatalogEntry[] = [];
  for (let i = 0; i < count; i++) {
    const cls = classes[i % 3];
    entries.push({
      address: `ten${String(i % 10).padStart(2, "0")}.products.prod_${String(i).padStart(3, "0")}`,
      score: 100 - i * 0.1,
      class: cls,
      text_match: 1,
      usage: (i * 37) % 900,
      rating: i % 4 === 0 ? null : (i % 5) + 1,
      description: `Fixture data product number ${i} used by the console tests.`,
      tags: [`domain${i % 5}`],
    });
  }
  return entries;
}

export function threeNodeChain(): LineageGraph {
  return {
    window: { from: null, to: null },
    nodes: [
      { kind: "table", id: "acme.s.raw" },
      { kind: "table", id: "acme.s.mid" },
      { kind: "view", id: "acme.s.top" },
    ],
    edges: [
      {
        src: { kind: "table", id: "acme.s.mid" },
        dst: { kind: "table", id: "acme.s.raw" },
        relation: "DERIVES_FROM",
        weight: 1,
        first_seen: "2026-08-01T00:00:00.000000+00:00",
        last_seen: "2026-08-01T00:00:00.000000+00:00",
        provenance: ["plan", "text"],
      },
      {
        src: { kind: "view", id: "acme.s.top" },
        dst: { kind: "table", id: "acme.s.mid" },
        relation: "DERIVES_FROM",
        weight: 1,
        first_seen: "2026-08-01T00:01:00.000000+00:00",
        last_seen: "2026-08-01T00:01:00.000000+00:00",
        provenance: ["static"],
      },
    ],
  };
}

export function pendingSuggestion(): Suggestion {
  return {
    id: "sug000001",
    kind: "ClusterKey",
    path: "payload.k",
    target: "acme.s.ev",
    state: "pending",
    created_at: "2026-08-01T00:00:00.000000+00:00",
    evidence: {
      window: { from: null, to: null },
      query_count: 100,
      path_shares: { "payload.k": 0.8, "payload.other": 0.2 },
      path_weights: { "payload.k": 80, "payload.other": 20 },
      avg_partitions_scanned: { "payload.k": 49.0, "payload.other": 48.5 },
    },
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function installFixtureFetch(state: FixtureState): void {
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    state.calls.push({ method, url, body });
    const [path, queryString] = url.replace(/^https?:\/\/[^/]+/, "").split("?");
    const params = new URLSearchParams(queryString ?? "");

    if (path === "/v1/catalog/search" && method === "GET") {
      const q = params.get("q") ?? "";
      const hits = state.catalog.filter(
        (e) => !q || e.address.includes(q) || e.description.includes(q),
      );
      return jsonResponse(hits);
    }
    const productMatch = path.match(/^\/v1\/products\/([^/]+)$/);
    if (productMatch && method === "GET") {
      const product = state.products[decodeURIComponent(productMatch[1])];
      if (!product) return jsonResponse({ error: "NotFound", message: "no such product" }, 404);
      return jsonResponse(product);
    }
    const feedbackMatch = path.match(/^\/v1\/products\/([^/]+)\/feedback$/);
    if (feedbackMatch && method === "POST") {
      const product = state.products[decodeURIComponent(feedbackMatch[1])];
      if (!product) return jsonResponse({ error: "NotFound", message: "no such product" }, 404);
      product.feedback.push({
        product: product.address,
        principal: "acme/tester",
        rating: (body as { rating: number }).rating,
        comment: (body as { comment: string }).comment,
        at: "2026-08-02T00:00:00.000000+00:00",
      });
      return jsonResponse(product.feedback[product.feedback.length - 1], 201);
    }
    if (path === "/v1/suggestions" && method === "GET") {
      return jsonResponse(state.suggestions);
    }
    const resolveMatch = path.match(/^\/v1\/suggestions\/([^/]+)\/resolve$/);
    if (resolveMatch && method === "POST") {
      const suggestion = state.suggestions.find((s) => s.id === resolveMatch[1]);
      if (!suggestion) return jsonResponse({ error: "NotPending", message: "no such suggestion" }, 409);
      if (state.failNextResolve) {
        state.failNextResolve = false;
        return jsonResponse({ error: "NotPending", message: "already resolved elsewhere" }, 409);
      }
      if (suggestion.state !== "pending") {
        return jsonResponse({ error: "NotPending", message: `suggestion is ${suggestion.state}` }, 409);
      }
      const decision = (body as { decision: string }).decision;
      suggestion.state = decision === "accept" ? "applied" : "rejected";
      return jsonResponse(suggestion);
    }
    if (path === "/v1/lineage" && method === "GET") {
      const object = params.get("object");
      const known = state.lineage.nodes.some((n) => n.id === object);
      if (object && !known) {
        return jsonResponse({ error: "UnknownObject", message: `unknown object: ${object}` }, 404);
      }
      return jsonResponse(state.lineage);
    }
    if (path === "/v1/groups" && method === "GET") {
      return jsonResponse(state.groups);
    }
    if (path === "/v1/groups" && method === "POST") {
      state.groups.push({
        id: (body as { id: string }).id,
        tenant: (body as { tenant: string }).tenant,
        members: ["acme/tester"],
        admins: ["acme/tester"],
        resources: [],
        permissions: [],
      });
      return jsonResponse(state.groups[state.groups.length - 1], 201);
    }
    return jsonResponse({ error: "NotFound", message: `no fixture route for ${method} ${path}` }, 404);
  }) as typeof fetch;
}

export function freshState(): FixtureState {
  const catalog = makeCatalog(200);
  const first = catalog[0];
  const products: Record<string, ProductDetail> = {
    [first.address]: {
      address: first.address,
      resources: ["acme.s.raw"],
      owner: "acme/admin",
      support_channel: "#help",
      description: first.description,
      business_objective: "serve analytics",
      tags: first.tags,
      class: first.class,
      rating: first.rating,
      stability_history: [
        {
          product: first.address,
          class: first.class,
          evaluated_at: "2026-08-01T00:00:00.000000+00:00",
          attributes: [
            { category: "OwnershipSupport", check: "owner+support", passed: true, evidence: "owner=acme/admin support_channel=set" },
            { category: "NamingDescriptionObjective", check: "docs", passed: true, evidence: "description_chars=120" },
            { category: "ReadOptimizedAccess", check: "preview", passed: first.class === "Stable", evidence: "acme.s.raw: preview 3.1ms" },
            { category: "Addressability", check: "resolve", passed: true, evidence: "all resolve" },
          ],
        },
      ],
      pii_findings: [],
      feedback: [],
    },
  };
  return {
    catalog,
    products,
    suggestions: [pendingSuggestion()],
    lineage: threeNodeChain(),
    groups: [],
    calls: [],
  };
}
