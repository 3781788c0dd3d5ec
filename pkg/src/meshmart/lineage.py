"""Lineage: per-query dependency graphs unioned over time windows.

Graphs form a commutative monoid under union (weights sum, seen-ranges
extend, provenance sets merge, the empty graph is the identity), so any
window partition unions to the same result. Runtime edges carry provenance
["plan", "text"] (one pipeline derives both here); definition edges carry
["static"].
"""

from __future__ import annotations

from collections import defaultdict

from .errors import UnknownObject
from .util import minute_bucket

OBJECT_KINDS = ("table", "view", "stream", "share")
RELATIONS = ("READS", "WRITES", "DERIVES_FROM", "EXECUTED_BY", "RAN_ON")


class DependencyGraph:
    """Nodes keyed (kind, id); edges keyed (src, dst, relation)."""

    def __init__(self, window: tuple[str | None, str | None] = (None, None)):
        self.window = window
        self.nodes: set[tuple[str, str]] = set()
        self.edges: dict[tuple, dict] = {}

    def add_node(self, kind: str, node_id: str) -> tuple[str, str]:
        node = (kind, node_id)
        self.nodes.add(node)
        return node

    def add_edge(
        self,
        src: tuple[str, str],
        dst: tuple[str, str],
        relation: str,
        seen: str,
        weight: int = 1,
        provenance: tuple[str, ...] = ("plan", "text"),
    ) -> None:
        self.nodes.add(src)
        self.nodes.add(dst)
        bucket = minute_bucket(seen)
        key = (src, dst, relation)
        entry = self.edges.get(key)
        if entry is None:
            self.edges[key] = {
                "weight": weight,
                "first_seen": bucket,
                "last_seen": bucket,
                "provenance": set(provenance),
            }
        else:
            entry["weight"] += weight
            entry["first_seen"] = min(entry["first_seen"], bucket)
            entry["last_seen"] = max(entry["last_seen"], bucket)
            entry["provenance"] |= set(provenance)

    def merge(self, other: "DependencyGraph") -> "DependencyGraph":
        self.nodes |= other.nodes
        for key, entry in other.edges.items():
            mine = self.edges.get(key)
            if mine is None:
                self.edges[key] = {
                    "weight": entry["weight"],
                    "first_seen": entry["first_seen"],
                    "last_seen": entry["last_seen"],
                    "provenance": set(entry["provenance"]),
                }
            else:
                mine["weight"] += entry["weight"]
                mine["first_seen"] = min(mine["first_seen"], entry["first_seen"])
                mine["last_seen"] = max(mine["last_seen"], entry["last_seen"])
                mine["provenance"] |= entry["provenance"]
        return self

    def union(self, other: "DependencyGraph") -> "DependencyGraph":
        out = DependencyGraph(self.window)
        out.merge(self)
        out.merge(other)
        return out

    # -- serialization & equality ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "window": {"from": self.window[0], "to": self.window[1]},
            "nodes": [{"kind": k, "id": i} for k, i in sorted(self.nodes)],
            "edges": [
                {
                    "src": {"kind": src[0], "id": src[1]},
                    "dst": {"kind": dst[0], "id": dst[1]},
                    "relation": relation,
                    "weight": entry["weight"],
                    "first_seen": entry["first_seen"],
                    "last_seen": entry["last_seen"],
                    "provenance": sorted(entry["provenance"]),
                }
                for (src, dst, relation), entry in sorted(self.edges.items())
            ],
        }

    def normalized(self):
        return (
            frozenset(self.nodes),
            tuple(
                (key, entry["weight"], entry["first_seen"], entry["last_seen"],
                 frozenset(entry["provenance"]))
                for key, entry in sorted(self.edges.items())
            ),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return self.normalized() == other.normalized()

    def __hash__(self):
        return hash(self.normalized())

    def to_graph_text(self) -> str:
        """Plain graph-description text for external visualizers."""
        lines = ["digraph lineage {"]
        for kind, node_id in sorted(self.nodes):
            lines.append(f'  "{kind}:{node_id}";')
        for (src, dst, relation), entry in sorted(self.edges.items()):
            lines.append(
                f'  "{src[0]}:{src[1]}" -> "{dst[0]}:{dst[1]}" '
                f'[label="{relation}" weight={entry["weight"]}];'
            )
        lines.append("}")
        return "\n".join(lines)

    # -- metrics -------------------------------------------------------------------------

    def degrees(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {node: 0 for node in self.nodes}
        for src, dst, _relation in self.edges:
            out[src] += 1
            out[dst] += 1
        return out

    def _undirected_adjacency(self) -> dict:
        adj = {node: set() for node in self.nodes}
        for src, dst, _relation in self.edges:
            if src != dst:
                adj[src].add(dst)
                adj[dst].add(src)
        return adj

    def components(self) -> list[list[tuple[str, str]]]:
        adj = self._undirected_adjacency()
        seen: set = set()
        out = []
        for node in sorted(self.nodes):
            if node in seen:
                continue
            comp = []
            stack = [node]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                comp.append(cur)
                stack.extend(adj[cur] - seen)
            out.append(sorted(comp))
        return out

    def cut_vertices(self) -> list[tuple[str, str]]:
        """Articulation points of the undirected graph (iterative Tarjan)."""
        adj = self._undirected_adjacency()
        index = {}
        low = {}
        cuts: set = set()
        counter = [0]
        for root in sorted(self.nodes):
            if root in index:
                continue
            stack = [(root, None, iter(sorted(adj[root])))]
            index[root] = low[root] = counter[0]
            counter[0] += 1
            root_children = 0
            while stack:
                node, parent, it = stack[-1]
                advanced = False
                for child in it:
                    if child == parent:
                        continue
                    if child not in index:
                        if node == root:
                            root_children += 1
                        index[child] = low[child] = counter[0]
                        counter[0] += 1
                        stack.append((child, node, iter(sorted(adj[child]))))
                        advanced = True
                        break
                    low[node] = min(low[node], index[child])
                if advanced:
                    continue
                stack.pop()
                if parent is not None:
                    low[parent] = min(low[parent], low[node])
                    if parent != root and low[node] >= index[parent]:
                        cuts.add(parent)
            if root_children > 1:
                cuts.add(root)
        return sorted(cuts)

    def stats(self) -> dict:
        comps = self.components()
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "degree": {f"{k}:{i}": d for (k, i), d in sorted(self.degrees().items())},
            "components": len(comps),
            "component_sizes": sorted((len(c) for c in comps), reverse=True),
            "cut_vertices": [f"{k}:{i}" for k, i in self.cut_vertices()],
        }


def graph_of_query(record: dict) -> DependencyGraph:
    """Star graph of one QueryRecord: query node plus its session/IO edges."""
    graph = DependencyGraph()
    seen = record["started_at"]
    query_node = graph.add_node("query", record["query_id"])
    session = record.get("session") or {}
    if session.get("principal"):
        graph.add_edge(query_node, ("user", session["principal"]), "EXECUTED_BY", seen)
    if session.get("warehouse"):
        graph.add_edge(query_node, ("warehouse", session["warehouse"]), "RAN_ON", seen)
    deps = record.get("dependencies") or {}
    kinds = deps.get("kinds", {})
    for address in deps.get("reads", []):
        kind = kinds.get(address, "table")
        graph.add_edge(query_node, (kind, address), "READS", seen)
    writes = deps.get("writes")
    if writes and record.get("status") == "success" and deps.get("write_mode") != "drop":
        kind = "view" if deps.get("write_mode") == "create_view" else "table"
        graph.add_edge(query_node, (kind, writes), "WRITES", seen)
    return graph


class LineageService:
    def __init__(self, gateway, catalog, query_node_cap: int = 10000):
        self.gateway = gateway  # sensing.QueryGateway (iter_records)
        self.catalog = catalog  # core.Catalog
        self.query_node_cap = query_node_cap

    def static_graph(self) -> DependencyGraph:
        """DERIVES_FROM edges from live view/CTAS definitions and streams."""
        graph = DependencyGraph()
        for address, rec in self.catalog.list_objects():
            body = rec.body
            kind = body.get("kind")
            qualified = address.qualified()
            created = body.get("created_at") or rec.updated_at
            if kind in ("table", "view"):
                for source in body.get("derived_from", []) or []:
                    graph.add_edge(
                        (kind, qualified),
                        (self._kind_of(source), source),
                        "DERIVES_FROM",
                        created,
                        provenance=("static",),
                    )
            if kind == "table" and body.get("stream"):
                graph.add_edge(
                    ("table", qualified),
                    ("stream", qualified),
                    "DERIVES_FROM",
                    created,
                    provenance=("static",),
                )
        return graph

    def _kind_of(self, qualified: str) -> str:
        found = self.catalog.try_resolve(qualified)
        if found is None:
            return "table"
        return found[0].kind.value

    def union_window(self, from_ts: str | None, to_ts: str | None,
                     include_static: bool = True) -> DependencyGraph:
        graph = DependencyGraph((from_ts, to_ts))
        if include_static:
            graph.merge(self.static_graph())
        query_nodes = 0
        for record in self.gateway.iter_records(from_ts, to_ts):
            graph.merge(graph_of_query(record))
            query_nodes += 1
        if query_nodes > self.query_node_cap:
            graph = collapse_query_nodes(graph)
        return graph

    def closure(self, qualified: str, direction: str = "downstream",
                max_depth: int = 10, from_ts: str | None = None,
                to_ts: str | None = None) -> DependencyGraph:
        """Object-level reachability through DERIVES_FROM and query composition."""
        graph = self.union_window(from_ts, to_ts)
        start_nodes = [n for n in graph.nodes if n[1] == qualified and n[0] in OBJECT_KINDS]
        if not start_nodes:
            found = self.catalog.try_resolve(qualified)
            if found is None:
                raise UnknownObject(f"unknown object: {qualified}")
            start_nodes = [(found[0].kind.value, qualified)]
        object_edges = _object_level_edges(graph)
        out = DependencyGraph(graph.window)
        visited: set = set()
        added: set = set()
        frontier = list(sorted(start_nodes))
        for node in frontier:
            out.add_node(*node)
            visited.add(node)
        depth = 0
        while frontier and depth < max_depth:
            depth += 1
            next_frontier = []
            for node in frontier:
                for (src, dst), entry in sorted(object_edges.items()):
                    if direction == "downstream" and dst == node:
                        neighbor = src
                    elif direction == "upstream" and src == node:
                        neighbor = dst
                    else:
                        continue
                    if (src, dst) not in added:
                        added.add((src, dst))
                        out.add_edge(src, dst, "DERIVES_FROM", entry["first_seen"],
                                     weight=entry["weight"],
                                     provenance=tuple(entry["provenance"]))
                        out.edges[(src, dst, "DERIVES_FROM")]["last_seen"] = entry["last_seen"]
                    if neighbor not in visited:
                        visited.add(neighbor)
                        next_frontier.append(neighbor)
            frontier = sorted(next_frontier)
        return out

    def graph_stats(self, from_ts: str | None = None, to_ts: str | None = None) -> dict:
        return self.union_window(from_ts, to_ts).stats()


def _object_level_edges(graph: DependencyGraph) -> dict:
    """Derived-object -> source-object edges: static plus query-composed."""
    edges: dict[tuple, dict] = {}

    def bump(src, dst, entry):
        key = (src, dst)
        mine = edges.get(key)
        if mine is None:
            edges[key] = {
                "weight": entry["weight"],
                "first_seen": entry["first_seen"],
                "last_seen": entry["last_seen"],
                "provenance": set(entry["provenance"]),
            }
        else:
            mine["weight"] += entry["weight"]
            mine["first_seen"] = min(mine["first_seen"], entry["first_seen"])
            mine["last_seen"] = max(mine["last_seen"], entry["last_seen"])
            mine["provenance"] |= set(entry["provenance"])

    reads_of: dict[str, list] = defaultdict(list)
    writes_of: dict[str, list] = defaultdict(list)
    for (src, dst, relation), entry in graph.edges.items():
        if relation == "DERIVES_FROM":
            bump(src, dst, entry)
        elif relation == "READS" and src[0] == "query":
            reads_of[src[1]].append((dst, entry))
        elif relation == "WRITES" and src[0] == "query":
            writes_of[src[1]].append((dst, entry))
    for query_id, writes in writes_of.items():
        for write_node, w_entry in writes:
            for read_node, r_entry in reads_of.get(query_id, []):
                if read_node == write_node:
                    continue
                bump(
                    write_node,
                    read_node,
                    {
                        "weight": 1,
                        "first_seen": w_entry["first_seen"],
                        "last_seen": w_entry["last_seen"],
                        "provenance": set(w_entry["provenance"]),
                    },
                )
    return edges


def collapse_query_nodes(graph: DependencyGraph) -> DependencyGraph:
    """Aggregate query stars into principal->object and object->object edges."""
    out = DependencyGraph(graph.window)
    user_of: dict[str, tuple] = {}
    for (src, dst, relation), entry in graph.edges.items():
        if relation == "EXECUTED_BY" and src[0] == "query":
            user_of[src[1]] = dst
    for (src, dst, relation), entry in graph.edges.items():
        if src[0] != "query" and dst[0] != "query":
            out.add_edge(src, dst, relation, entry["first_seen"],
                         weight=entry["weight"], provenance=tuple(entry["provenance"]))
            out.edges[(src, dst, relation)]["last_seen"] = entry["last_seen"]
            continue
        if relation in ("READS", "WRITES") and src[0] == "query":
            user = user_of.get(src[1])
            if user is not None:
                out.add_edge(user, dst, relation, entry["first_seen"],
                             weight=entry["weight"], provenance=tuple(entry["provenance"]))
                out.edges[(user, dst, relation)]["last_seen"] = max(
                    out.edges[(user, dst, relation)]["last_seen"], entry["last_seen"]
                )
    for (src, dst), entry in _object_level_edges(graph).items():
        out.add_edge(src, dst, "DERIVES_FROM", entry["first_seen"],
                     weight=entry["weight"], provenance=tuple(entry["provenance"]))
        out.edges[(src, dst, "DERIVES_FROM")]["last_seen"] = max(
            out.edges[(src, dst, "DERIVES_FROM")]["last_seen"], entry["last_seen"]
        )
    return out
