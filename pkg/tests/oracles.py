"""Independent oracles the test suite checks the engine against.

Everything here is deliberately naive (full scans, nested loops, recursive
traversal) and implemented from the documented semantics only - never by
calling the code under test.
"""

from __future__ import annotations

import json
import math


# -- variant helpers (duplicated on purpose; oracles stay independent) --------

def oracle_type_class(value):
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "num"
    if isinstance(value, str):
        return "str"
    if isinstance(value, list):
        return "list"
    return "dict"


def oracle_compare(a, b):
    if a is None or b is None:
        return None
    ca, cb = oracle_type_class(a), oracle_type_class(b)
    if ca != cb or ca in ("list", "dict"):
        return None
    return -1 if a < b else (1 if a > b else 0)


def oracle_path_value(row: tuple, columns: list[str], path: str):
    head = path.split(".", 1)[0]
    if head not in columns:
        return None
    value = row[columns.index(head)]
    if "." in path:
        for seg in path.split(".")[1:]:
            if not isinstance(value, dict):
                return None
            value = value.get(seg)
    return value


# -- store: brute-force full scan filter -----------------------------------------

def full_scan_filter(rows: list[tuple], columns: list[str], predicate) -> list[tuple]:
    """Filter every row against the conjunction; no pruning, no statistics."""

    def term_ok(row, term) -> bool:
        value = oracle_path_value(row, columns, term.path)
        if term.op == "is_null":
            return value is None
        cmp = oracle_compare(value, term.value)
        if cmp is None:
            return False
        return {
            "=": cmp == 0,
            "<": cmp < 0,
            ">": cmp > 0,
            "<=": cmp <= 0,
            ">=": cmp >= 0,
        }[term.op]

    return [row for row in rows if all(term_ok(row, t) for t in predicate or [])]


# -- schema inference: naive recursive traversal ------------------------------------

ARR = "[]"  # oracle path marker for array descent


def _oracle_join(a: str, b: str) -> str:
    """Join over serialized type names, reimplementing the documented lattice."""
    if a == b:
        return a
    if a == "BOTTOM":
        return b
    if b == "BOTTOM":
        return a
    if a == "NULL":
        return b
    if b == "NULL":
        return a
    if a == "VARIANT" or b == "VARIANT":
        return "VARIANT"
    scalars = {"BOOL", "INT", "FLOAT", "STRING"}
    if a in scalars and b in scalars:
        return "FLOAT" if {a, b} == {"INT", "FLOAT"} else "STRING"
    a_arr, b_arr = a.startswith("ARRAY<"), b.startswith("ARRAY<")
    if a_arr and b_arr:
        return f"ARRAY<{_oracle_join(a[6:-1], b[6:-1])}>"
    if a == "OBJECT" and b == "OBJECT":
        return "OBJECT"
    return "VARIANT"


def _oracle_type_of(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "BOOL"
    if isinstance(value, int):
        return "INT"
    if isinstance(value, float):
        return "FLOAT"
    if isinstance(value, str):
        return "STRING"
    if isinstance(value, dict):
        return "OBJECT"
    element = "BOTTOM"
    for item in value:
        element = _oracle_join(element, _oracle_type_of(item))
    return f"ARRAY<{element}>"


def naive_infer(docs: list[dict]) -> dict:
    """Recompute {path tuple -> {type, nullable, seen}} plus child relations.

    Paths are tuples of key strings with ARR marking array descent. A path
    is "present" in a relation row iff following it yields a non-null value;
    nullable means absent-or-null in at least one row of its relation. Child
    relations exist only for array paths whose global element type (through
    nested arrays) is exactly OBJECT; descriptors under arrays that fail
    that rule are pruned.
    """
    info: dict[tuple, dict] = {}
    relation_rows: dict[tuple, int] = {(): len(docs)}

    def observe(path: tuple, value) -> None:
        entry = info.setdefault(path, {"type": "BOTTOM", "seen": 0})
        entry["type"] = _oracle_join(entry["type"], _oracle_type_of(value))
        if value is not None:
            entry["seen"] += 1

    def walk(path: tuple, value) -> None:
        if isinstance(value, dict):
            for key, item in value.items():
                child = path + (key,)
                observe(child, item)
                walk(child, item)
        elif isinstance(value, list):
            arr = path + (ARR,)
            relation_rows[arr] = relation_rows.get(arr, 0) + len(value)
            for item in value:
                if isinstance(item, dict):
                    for key, sub in item.items():
                        child = arr + (key,)
                        observe(child, sub)
                        walk(child, sub)
                elif isinstance(item, list):
                    walk(arr, item)
                # scalar / null elements: a relation row with no keys

    for doc in docs:
        walk((), doc)

    def enclosing_relation(path: tuple) -> tuple:
        for i in range(len(path), 0, -1):
            if path[i - 1] == ARR:
                return path[:i]
        return ()

    # decide which ARR chains are real child relations (element type OBJECT,
    # reachable only through relation-valid enclosing arrays)
    relations: set[tuple] = set()
    for arr_path in sorted(relation_rows, key=lambda p: sum(1 for s in p if s == ARR)):
        if arr_path == ():
            continue
        base = arr_path
        depth = 0
        while base and base[-1] == ARR:
            base = base[:-1]
            depth += 1
        enclosing = enclosing_relation(base)
        if enclosing != () and enclosing not in relations:
            continue
        base_type = info.get(base, {}).get("type", "BOTTOM")
        for _ in range(depth):
            if not base_type.startswith("ARRAY<"):
                base_type = None
                break
            base_type = base_type[6:-1]
        if base_type == "OBJECT":
            relations.add(arr_path)

    out = {}
    for path, entry in info.items():
        if path and path[-1] == ARR:
            continue
        relation = enclosing_relation(path)
        if relation != () and relation not in relations:
            continue  # pruned: array did not become a child relation
        rows = relation_rows.get(relation, 0)
        out[path] = {
            "type": entry["type"],
            "seen": entry["seen"],
            "nullable": entry["seen"] < rows,
        }
    return {
        "fields": out,
        "relations": relations,
        "relation_rows": {r: relation_rows[r] for r in relations},
        "doc_count": len(docs),
    }


# -- flatten: naive per-relation row materialization ---------------------------------

def oracle_flatten(docs: list[dict]) -> dict:
    """Recompute what the generated flatten SQL must produce, per relation.

    Returns {relation path tuple: list of row dicts}; row dicts map column
    paths (tuples) to CAST-coerced values, plus "_idx0".. index keys for
    array relations. _id is deliberately absent (compared separately).
    """
    info = naive_infer(docs)
    fields = info["fields"]
    relations = info["relations"]

    def enclosing(path: tuple) -> tuple:
        for i in range(len(path), 0, -1):
            if path[i - 1] == ARR:
                return path[:i]
        return ()

    def is_column(path: tuple, ftype: str) -> bool:
        if ftype in ("OBJECT", "BOTTOM"):
            return False
        if ftype.startswith("ARRAY<"):
            chain = path + (ARR,)
            inner = ftype
            while inner.startswith("ARRAY<"):
                if chain in relations:
                    return False
                chain = chain + (ARR,)
                inner = inner[6:-1]
        return True

    columns_of: dict[tuple, list] = {}
    for path, entry in fields.items():
        rel = enclosing(path)
        if is_column(path, entry["type"]):
            columns_of.setdefault(rel, []).append((path, entry["type"]))

    def coerce(value, ftype: str):
        if ftype in ("BOOL", "INT", "FLOAT", "STRING"):
            return _o_cast(value, ftype)
        return value  # NULL / VARIANT / arrays: uncast

    def resolve(container, rel: tuple, path: tuple):
        cur = container
        for seg in path[len(rel):]:
            if not isinstance(cur, dict):
                return None
            cur = cur.get(seg)
        return cur

    def base_of(rel: tuple) -> tuple:
        trimmed = rel
        while trimmed and trimmed[-1] == ARR:
            trimmed = trimmed[:-1]
        return trimmed

    children_of: dict[tuple, list] = {(): []}
    for rel in sorted(relations, key=len):
        children_of[rel] = []
        children_of[enclosing(base_of(rel))].append(rel)

    out: dict[tuple, list] = {rel: [] for rel in [()] + sorted(relations)}

    def emit_row(rel: tuple, container, idxs: list[int]):
        row = {f"_idx{i}": v for i, v in enumerate(idxs)}
        for path, ftype in columns_of.get(rel, []):
            row[path] = coerce(resolve(container, rel, path), ftype)
        out[rel].append(row)

    def expand(rel: tuple, parent_rel: tuple, parent_container, idxs: list[int]):
        sub = rel[len(parent_rel):]
        keys = tuple(s for s in sub if s != ARR)
        depth = sum(1 for s in sub if s == ARR)
        value = parent_container
        for seg in keys:
            value = value.get(seg) if isinstance(value, dict) else None
        stack = [(value, idxs)]
        for _level in range(depth):
            next_stack = []
            for candidate, cur_idxs in stack:
                if isinstance(candidate, list):
                    for i, elem in enumerate(candidate):
                        next_stack.append((elem, cur_idxs + [i]))
            stack = next_stack
        for element, cur_idxs in stack:
            container = element if isinstance(element, dict) else {}
            emit_row(rel, container, cur_idxs)
            for child in children_of.get(rel, []):
                expand(child, rel, container, cur_idxs)

    for doc in docs:
        emit_row((), doc, [])
        for rel in children_of[()]:
            expand(rel, (), doc, [])
    return {rel: rows for rel, rows in out.items()}


# -- CDC views: latest record per key ------------------------------------------------

def latest_per_key(rows: list[dict], key_fields: list[str], order_fields: list[str]) -> list[dict]:
    """Group by key tuple, keep the row with the max order tuple."""
    best: dict = {}
    for row in rows:
        key = json.dumps([_json_safe(row.get(f)) for f in key_fields], sort_keys=True)
        order = tuple(_orderable(row.get(f)) for f in order_fields)
        if key not in best or order > best[key][0]:
            best[key] = (order, row)
    return [pair[1] for pair in best.values()]


def _json_safe(value):
    return value


def _orderable(value):
    # None sorts below everything of any type
    if value is None:
        return (0, "")
    if isinstance(value, bool):
        return (1, str(int(value)))
    if isinstance(value, (int, float)):
        return (2, float(value))
    return (3, str(value))


# -- SQL: brute-force nested-loop / naive-aggregate evaluator -------------------------
#
# Consumes the parsed AST (parse correctness is checked separately via AST
# snapshots) but evaluates with plain nested loops and dict environments -
# no planner, no pushdown, no pruning.

from meshmart.sql.ast import (  # noqa: E402
    BinaryOp,
    Cast,
    ColumnRef,
    FromFlatten,
    FromSubquery,
    FromTable,
    FuncCall,
    IsNull,
    Literal,
    Select,
    SelectItem,
    Star,
    UnaryOp,
)


def _o_truthy(v):
    return v is True


def _o_not(v):
    return None if v is None else not _o_truthy(v)


def _o_and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return _o_truthy(a) and _o_truthy(b)


def _o_or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return _o_truthy(a) or _o_truthy(b)


def _o_isnum(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _o_cast(value, type_name):
    if value is None:
        return None
    if type_name == "VARIANT":
        return value
    if type_name == "INT":
        if isinstance(value, bool):
            return 1 if value else 0
        if isinstance(value, int):
            return value
        if isinstance(value, float):
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                try:
                    return int(float(value))
                except ValueError:
                    return None
        return None
    if type_name == "FLOAT":
        if isinstance(value, bool):
            return 1.0 if value else 0.0
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                return None
        return None
    if type_name == "BOOL":
        if isinstance(value, bool):
            return value
        if isinstance(value, (int, float)):
            return value != 0
        if isinstance(value, str):
            low = value.strip().lower()
            return True if low == "true" else (False if low == "false" else None)
        return None
    if type_name == "STRING":
        if isinstance(value, str):
            return value
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, float)):
            return json.dumps(value)
        return json.dumps(value, separators=(",", ":"), sort_keys=True, ensure_ascii=False)
    raise ValueError(type_name)


def _o_json_get(value, path):
    if not isinstance(value, dict) or not isinstance(path, str):
        return None
    cur = value
    for seg in path.split("."):
        if not isinstance(cur, dict):
            return None
        cur = cur.get(seg)
    return cur


class SqlOracle:
    """Naive evaluator over {qualified name: (columns, rows)} fixtures."""

    def __init__(self, tables: dict, views: dict | None = None, session_tenant: str = ""):
        self.tables = tables
        self.views = views or {}  # qualified -> SQL text
        self.tenant = session_tenant

    # env rows are dicts {(alias, column): value}

    def lookup_name(self, parts):
        candidates = []
        if self.tenant:
            candidates.append(self.tenant + "." + ".".join(parts))
        candidates.append(".".join(parts))
        for name in candidates:
            if name in self.tables or name in self.views:
                return name
        raise KeyError(".".join(parts))

    def eval_select(self, select: Select, outer_ctes=None):
        ctes = dict(outer_ctes or {})
        for cte in select.ctes:
            ctes[cte.name] = self.eval_select(cte.select, ctes)
        envs = [dict()]
        bindings = []  # (alias, columns)
        for i, element in enumerate(select.from_elements):
            item = element.item
            if isinstance(item, FromFlatten):
                new_envs = []
                for env in envs:
                    value = self.eval_expr(item.expr, env, bindings)
                    if isinstance(value, list):
                        for idx, elem in enumerate(value):
                            child = dict(env)
                            child[(item.alias, "value")] = elem
                            child[(item.alias, "index")] = idx
                            new_envs.append(child)
                envs = new_envs
                bindings.append((item.alias, ("value", "index")))
                continue
            alias, columns, rows = self.from_rows(item, ctes)
            if element.join == "cross" or i == 0:
                envs = [
                    {**env, **{(alias, c): v for c, v in zip(columns, row)}}
                    for env in envs
                    for row in rows
                ]
                bindings.append((alias, columns))
            elif element.join == "inner":
                bindings.append((alias, columns))
                new_envs = []
                for env in envs:
                    for row in rows:
                        cand = {**env, **{(alias, c): v for c, v in zip(columns, row)}}
                        if self.eval_expr(element.on, cand, bindings) is True:
                            new_envs.append(cand)
                envs = new_envs
            elif element.join == "left":
                bindings.append((alias, columns))
                new_envs = []
                for env in envs:
                    matched = False
                    for row in rows:
                        cand = {**env, **{(alias, c): v for c, v in zip(columns, row)}}
                        if self.eval_expr(element.on, cand, bindings) is True:
                            new_envs.append(cand)
                            matched = True
                    if not matched:
                        new_envs.append({**env, **{(alias, c): None for c in columns}})
                envs = new_envs
        if select.where is not None:
            envs = [e for e in envs if self.eval_expr(select.where, e, bindings) is True]

        has_agg = select.group_by or any(
            isinstance(i, SelectItem) and self.has_agg(i.expr) for i in select.items
        )
        if has_agg:
            return self.eval_aggregate(select, envs, bindings)
        columns = []
        exprs = []
        for pos, item in enumerate(select.items):
            if isinstance(item, Star):
                for alias, cols in bindings:
                    if item.qualifier is None or item.qualifier == alias:
                        for c in cols:
                            columns.append(c)
                            exprs.append(ColumnRef((alias, c)))
            else:
                columns.append(item.alias or self.default_name(item.expr, pos))
                exprs.append(item.expr)
        rows = [tuple(self.eval_expr(e, env, bindings) for e in exprs) for env in envs]
        return columns, rows

    def from_rows(self, item, ctes):
        if isinstance(item, FromSubquery):
            columns, rows = self.eval_select(item.select, ctes)
            return item.alias, tuple(columns), rows
        if isinstance(item, FromTable):
            if len(item.parts) == 1 and item.parts[0] in ctes:
                columns, rows = ctes[item.parts[0]]
                return item.binding(), tuple(columns), rows
            name = self.lookup_name(item.parts)
            if name in self.views:
                from meshmart.sql.parser import parse as _parse

                columns, rows = self.eval_select(_parse(self.views[name]), {})
                return item.binding(), tuple(columns), rows
            columns, rows = self.tables[name]
            return item.binding(), tuple(columns), rows
        raise TypeError(item)

    def has_agg(self, expr):
        if isinstance(expr, FuncCall):
            if expr.name in ("COUNT", "SUM", "MIN", "MAX", "AVG"):
                return True
            return any(self.has_agg(a) for a in expr.args)
        if isinstance(expr, BinaryOp):
            return self.has_agg(expr.left) or self.has_agg(expr.right)
        if isinstance(expr, UnaryOp):
            return self.has_agg(expr.expr)
        if isinstance(expr, (IsNull, Cast)):
            inner = expr.expr
            return self.has_agg(inner)
        return False

    def default_name(self, expr, pos):
        if isinstance(expr, ColumnRef):
            return expr.parts[-1]
        if isinstance(expr, FuncCall):
            return expr.name.lower()
        if isinstance(expr, Cast) and isinstance(expr.expr, (ColumnRef, FuncCall)):
            return self.default_name(expr.expr, pos)
        return f"col{pos + 1}"

    def eval_aggregate(self, select, envs, bindings):
        groups = {}
        order = []
        for env in envs:
            key_vals = [self.eval_expr(k, env, bindings) for k in select.group_by]
            key = json.dumps(key_vals, sort_keys=True, default=str)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(env)
        if not groups and not select.group_by:
            groups["<e>"] = []
            order.append("<e>")
        columns = []
        out_rows = []
        for pos, item in enumerate(select.items):
            columns.append(item.alias or self.default_name(item.expr, pos))
        for key in order:
            members = groups[key]
            row = []
            for item in select.items:
                expr = item.expr
                if self.has_agg(expr):
                    row.append(self.eval_agg_call(expr, members, bindings))
                else:
                    row.append(self.eval_expr(expr, members[0], bindings) if members else None)
            out_rows.append(tuple(row))
        return columns, out_rows

    def eval_agg_call(self, call: FuncCall, members, bindings):
        if call.star:
            return len(members)
        values = [self.eval_expr(call.args[0], env, bindings) for env in members]
        non_null = [v for v in values if v is not None]
        if call.name == "COUNT":
            return len(non_null)
        if call.name == "SUM":
            nums = [v for v in non_null if _o_isnum(v)]
            return sum(nums) if nums else None
        if call.name == "AVG":
            nums = [v for v in non_null if _o_isnum(v)]
            return (sum(nums) / len(nums)) if nums else None
        if call.name in ("MIN", "MAX"):
            best = None
            for v in non_null:
                if best is None:
                    best = v
                else:
                    c = oracle_compare(v, best)
                    if c is None:
                        continue
                    if call.name == "MIN" and c < 0:
                        best = v
                    if call.name == "MAX" and c > 0:
                        best = v
            return best
        raise ValueError(call.name)

    def eval_expr(self, expr, env, bindings):
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, ColumnRef):
            if len(expr.parts) == 2:
                return env[(expr.parts[0], expr.parts[1])]
            matches = [
                (alias, expr.parts[0])
                for alias, cols in bindings
                if expr.parts[0] in cols
            ]
            if len(matches) != 1:
                raise KeyError(expr.parts)
            return env[matches[0]]
        if isinstance(expr, Cast):
            return _o_cast(self.eval_expr(expr.expr, env, bindings), expr.type_name)
        if isinstance(expr, IsNull):
            v = self.eval_expr(expr.expr, env, bindings) is None
            return (not v) if expr.negated else v
        if isinstance(expr, UnaryOp):
            v = self.eval_expr(expr.expr, env, bindings)
            if expr.op == "NOT":
                return _o_not(v)
            return -v if _o_isnum(v) else None
        if isinstance(expr, FuncCall):
            if expr.name == "JSON_GET":
                base = self.eval_expr(expr.args[0], env, bindings)
                path = self.eval_expr(expr.args[1], env, bindings)
                return _o_json_get(base, path)
            raise ValueError(expr.name)
        if isinstance(expr, BinaryOp):
            op = expr.op
            a = self.eval_expr(expr.left, env, bindings)
            if op == "AND":
                return _o_and(a, self.eval_expr(expr.right, env, bindings))
            if op == "OR":
                return _o_or(a, self.eval_expr(expr.right, env, bindings))
            b = self.eval_expr(expr.right, env, bindings)
            if op in ("=", "!=", "<", ">", "<=", ">="):
                c = oracle_compare(a, b)
                if c is None:
                    return None
                return {
                    "=": c == 0,
                    "!=": c != 0,
                    "<": c < 0,
                    ">": c > 0,
                    "<=": c <= 0,
                    ">=": c >= 0,
                }[op]
            if not _o_isnum(a) or not _o_isnum(b):
                return None
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return a / b if b != 0 else None
            if op == "%":
                return a % b if b != 0 else None
        raise TypeError(expr)


# -- graph: brute-force articulation points and components ---------------------------

def undirected_components(nodes: set, edges: set[tuple]) -> int:
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, count = set(), 0
    for n in nodes:
        if n in seen:
            continue
        count += 1
        stack = [n]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(adj[cur] - seen)
    return count


def brute_force_articulation(nodes: set, edges: set[tuple]) -> set:
    """A node is a cut vertex iff removing it increases the component count."""
    base = undirected_components(nodes, edges)
    cuts = set()
    for n in nodes:
        rem_nodes = nodes - {n}
        rem_edges = {(a, b) for a, b in edges if a != n and b != n}
        if rem_nodes and undirected_components(rem_nodes, rem_edges) > base:
            cuts.add(n)
    return cuts
