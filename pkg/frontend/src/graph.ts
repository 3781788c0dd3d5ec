// Force-directed layout with a deterministic seed so renders (and tests)
// are stable across runs.

import type { LineageGraph } from "./types.js";

export interface PlacedNode {
  kind: string;
  id: string;
  x: number;
  y: number;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function layout(graph: LineageGraph, width = 640, height = 400, seed = 42): PlacedNode[] {
  const rand = mulberry32(seed);
  const nodes: PlacedNode[] = graph.nodes
    .slice()
    .sort((a, b) => (a.kind + a.id).localeCompare(b.kind + b.id))
    .map((n) => ({ kind: n.kind, id: n.id, x: rand() * width, y: rand() * height }));
  const index = new Map(nodes.map((n, i) => [`${n.kind}:${n.id}`, i]));
  const springs: [number, number][] = [];
  for (const edge of graph.edges) {
    const a = index.get(`${edge.src.kind}:${edge.src.id}`);
    const b = index.get(`${edge.dst.kind}:${edge.dst.id}`);
    if (a !== undefined && b !== undefined && a !== b) springs.push([a, b]);
  }
  const repulsion = 4000;
  const springLength = 120;
  for (let iter = 0; iter < 150; iter++) {
    const fx = new Array(nodes.length).fill(0);
    const fy = new Array(nodes.length).fill(0);
    for (let i = 0; i < nodes.length; i++) {
      for (let j = i + 1; j < nodes.length; j++) {
        const dx = nodes[i].x - nodes[j].x;
        const dy = nodes[i].y - nodes[j].y;
        const d2 = Math.max(25, dx * dx + dy * dy);
        const f = repulsion / d2;
        const d = Math.sqrt(d2);
        fx[i] += (dx / d) * f;
        fy[i] += (dy / d) * f;
        fx[j] -= (dx / d) * f;
        fy[j] -= (dy / d) * f;
      }
    }
    for (const [a, b] of springs) {
      const dx = nodes[b].x - nodes[a].x;
      const dy = nodes[b].y - nodes[a].y;
      const d = Math.max(5, Math.sqrt(dx * dx + dy * dy));
      const f = (d - springLength) * 0.05;
      fx[a] += (dx / d) * f;
      fy[a] += (dy / d) * f;
      fx[b] -= (dx / d) * f;
      fy[b] -= (dy / d) * f;
    }
    const damp = 0.85 ** iter * 6 + 0.5;
    for (let i = 0; i < nodes.length; i++) {
      nodes[i].x = Math.min(width - 20, Math.max(20, nodes[i].x + fx[i] * damp * 0.02));
      nodes[i].y = Math.min(height - 20, Math.max(20, nodes[i].y + fy[i] * damp * 0.02));
    }
  }
  return nodes;
}

const KIND_COLOR: Record<string, string> = {
  table: "#2563eb",
  view: "#7c3aed",
  stream: "#0891b2",
  share: "#ca8a04",
  query: "#9ca3af",
  user: "#16a34a",
  warehouse: "#ea580c",
};

export function renderSvg(
  graph: LineageGraph,
  onNodeClick: (id: string) => void,
  width = 640,
  height = 400,
): SVGSVGElement {
  const placed = layout(graph, width, height);
  const index = new Map(placed.map((n) => [`${n.kind}:${n.id}`, n]));
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "lineage-svg");
  for (const edge of graph.edges) {
    const a = index.get(`${edge.src.kind}:${edge.src.id}`);
    const b = index.get(`${edge.dst.kind}:${edge.dst.id}`);
    if (!a || !b) continue;
    const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", `edge edge-${edge.relation.toLowerCase()}`);
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${edge.relation} (w=${edge.weight})`;
    line.append(title);
    svg.append(line);
  }
  for (const node of placed) {
    const group = document.createElementNS("http://www.w3.org/2000/svg", "g");
    group.setAttribute("class", `node node-${node.kind}`);
    group.setAttribute("data-node-id", node.id);
    group.setAttribute("data-node-kind", node.kind);
    const circle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    circle.setAttribute("cx", String(node.x));
    circle.setAttribute("cy", String(node.y));
    circle.setAttribute("r", "10");
    circle.setAttribute("fill", KIND_COLOR[node.kind] ?? "#6b7280");
    const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
    label.setAttribute("x", String(node.x + 13));
    label.setAttribute("y", String(node.y + 4));
    label.textContent = node.id.split(".").slice(-1)[0];
    group.append(circle, label);
    group.addEventListener("click", () => onNodeClick(node.id));
    svg.append(group);
  }
  return svg;
}
