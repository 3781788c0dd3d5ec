"""Plan evaluator: row-at-a-time over pruned scans, three-valued logic.

NULL comparisons and incomparable cross-type comparisons yield unknown,
which WHERE treats as false. JSON_GET returns null for missing paths and
CAST failures yield null rather than errors (schema-on-read tolerance).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ExecutionError, PlanError
from ..util import dumps_canonical
from ..variant import sort_key, type_class, variant_compare, variant_get
from .ast import BinaryOp, Cast, ColumnRef, FuncCall, IsNull, Literal, UnaryOp
from .planner import (
    PlanAggregate,
    PlanDedup,
    PlanFilter,
    PlanFlatten,
    PlanJoin,
    PlanLimit,
    PlanProject,
    PlanScan,
    PlanSort,
    PlanSubquery,
    PlanWrite,
)

ColKey = tuple  # (binding alias or "", column name)


@dataclass
class ScanEvent:
    address: str
    via_share: str | None
    stats: dict


@dataclass
class ExecResult:
    columns: list[str]
    rows: list[tuple]
    scans: list[ScanEvent] = field(default_factory=list)


class StorageAdapter:
    """What the executor needs from the platform: pruned scans."""

    def scan(self, address: str, pushed, via_share):
        raise NotImplementedError


def cast_value(value, type_name: str):
    """CAST semantics shared with generated flatten SQL; failure -> null."""
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
            lowered = value.strip().lower()
            if lowered == "true":
                return True
            if lowered == "false":
                return False
            return None
        return None
    if type_name == "STRING":
        if isinstance(value, str):
            return value
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, float)):
            return json.dumps(value)
        return dumps_canonical(value)
    raise ExecutionError(f"unknown cast type: {type_name}")


def compile_expr(expr, columns: list[ColKey]):
    """Compile an expression to a row -> value closure with bound indices."""
    if isinstance(expr, Literal):
        value = expr.value
        return lambda row: value
    if isinstance(expr, ColumnRef):
        idx = _resolve(columns, expr.parts)
        return lambda row: row[idx]
    if isinstance(expr, Cast):
        inner = compile_expr(expr.expr, columns)
        type_name = expr.type_name
        return lambda row: cast_value(inner(row), type_name)
    if isinstance(expr, IsNull):
        inner = compile_expr(expr.expr, columns)
        if expr.negated:
            return lambda row: inner(row) is not None
        return lambda row: inner(row) is None
    if isinstance(expr, UnaryOp):
        inner = compile_expr(expr.expr, columns)
        if expr.op == "NOT":
            return lambda row: _not(inner(row))
        return lambda row: _neg(inner(row))
    if isinstance(expr, FuncCall):
        if expr.name == "JSON_GET":
            if len(expr.args) != 2:
                raise PlanError("JSON_GET takes (variant, 'path')")
            base = compile_expr(expr.args[0], columns)
            path_fn = compile_expr(expr.args[1], columns)
            def json_get(row):
                path = path_fn(row)
                if not isinstance(path, str):
                    return None
                value = base(row)
                if not isinstance(value, dict):
                    return None
                return variant_get(value, path)
            return json_get
        raise PlanError(f"unknown function: {expr.name}")
    if isinstance(expr, BinaryOp):
        op = expr.op
        left = compile_expr(expr.left, columns)
        right = compile_expr(expr.right, columns)
        if op == "AND":
            return lambda row: _and(left(row), right(row))
        if op == "OR":
            return lambda row: _or(left(row), right(row))
        if op in ("=", "!=", "<", ">", "<=", ">="):
            return lambda row: _compare(op, left(row), right(row))
        if op in ("+", "-", "*", "/", "%"):
            return lambda row: _arith(op, left(row), right(row))
        raise PlanError(f"unknown operator: {op}")
    raise PlanError(f"uncompilable expression: {expr!r}")


def _resolve(columns: list[ColKey], parts: tuple[str, ...]) -> int:
    if len(parts) == 1:
        matches = [i for i, (_b, name) in enumerate(columns) if name == parts[0]]
        if len(matches) == 1:
            return matches[0]
        if not matches:
            raise PlanError(f"unknown column: {parts[0]}")
        raise PlanError(f"ambiguous column: {parts[0]}")
    if len(parts) == 2:
        matches = [
            i for i, (binding, name) in enumerate(columns)
            if binding == parts[0] and name == parts[1]
        ]
        if len(matches) == 1:
            return matches[0]
        if not matches:
            raise PlanError(f"unknown column: {parts[0]}.{parts[1]}")
        raise PlanError(f"ambiguous column: {parts[0]}.{parts[1]}")
    raise PlanError(f"column references use at most alias.name: {'.'.join(parts)}")


# three-valued logic: True / False / None


def _not(v):
    if v is None:
        return None
    return not _truthy(v)


def _truthy(v) -> bool:
    return v is True


def _and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return _truthy(a) and _truthy(b)


def _or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return _truthy(a) or _truthy(b)


def _compare(op, a, b):
    cmp = variant_compare(a, b)
    if cmp is None:
        return None
    if op == "=":
        return cmp == 0
    if op == "!=":
        return cmp != 0
    if op == "<":
        return cmp < 0
    if op == ">":
        return cmp > 0
    if op == "<=":
        return cmp <= 0
    return cmp >= 0


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _arith(op, a, b):
    if not _is_num(a) or not _is_num(b):
        return None
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                return None
            result = a / b
            return result
        if op == "%":
            if b == 0:
                return None
            return a % b
    except OverflowError:
        return None
    return None


class Executor:
    def __init__(self, storage: StorageAdapter):
        self.storage = storage
        self.scans: list[ScanEvent] = []

    def run(self, node) -> ExecResult:
        columns, rows = self._exec(node)
        return ExecResult(columns=[name for _b, name in columns], rows=rows, scans=self.scans)

    # Each _exec returns (columns: list[(binding, name)], rows: list[tuple]).

    def _exec(self, node):
        if node is None:
            # FROM-less select: one empty row
            return [], [()]
        if isinstance(node, PlanScan):
            rows, stats = self.storage.scan(node.address, node.pushed, node.via_share)
            self.scans.append(ScanEvent(node.address, node.via_share, stats))
            return [(node.alias, c) for c in node.columns], rows
        if isinstance(node, PlanSubquery):
            _inner_cols, rows = self._exec(node.input)
            return [(node.alias, c) for c in node.columns], rows
        if isinstance(node, PlanDedup):
            return self._exec_dedup(node)
        if isinstance(node, PlanFlatten):
            return self._exec_flatten(node)
        if isinstance(node, PlanJoin):
            return self._exec_join(node)
        if isinstance(node, PlanFilter):
            columns, rows = self._exec(node.input)
            fn = compile_expr(node.expr, columns)
            return columns, [r for r in rows if fn(r) is True]
        if isinstance(node, PlanProject):
            columns, rows = self._exec(node.input)
            fns = [compile_expr(e, columns) for _n, e in node.items]
            out_cols = [("", n) for n, _e in node.items]
            return out_cols, [tuple(f(r) for f in fns) for r in rows]
        if isinstance(node, PlanAggregate):
            return self._exec_aggregate(node)
        if isinstance(node, PlanSort):
            columns, rows = self._exec(node.input)
            fns = [(compile_expr(e, columns), desc) for e, desc in node.keys]
            for fn, desc in reversed(fns):
                rows = sorted(rows, key=lambda r: sort_key(fn(r)), reverse=desc)
            return columns, rows
        if isinstance(node, PlanLimit):
            columns, rows = self._exec(node.input)
            return columns, rows[: node.n]
        if isinstance(node, PlanWrite):
            raise ExecutionError("write plans are executed by the query gateway")
        raise ExecutionError(f"unknown plan node: {type(node).__name__}")

    def _exec_dedup(self, node: PlanDedup):
        columns, rows = self._exec(node.input)
        col_index = {name: i for i, (_b, name) in enumerate(columns)}

        def path_value(row, path: str):
            head, _, rest = path.partition(".")
            idx = col_index.get(head)
            if idx is None:
                return None
            value = row[idx]
            if rest:
                if not isinstance(value, dict):
                    return None
                return variant_get(value, rest)
            return value

        best: dict[str, tuple] = {}
        order: list[str] = []
        for row in rows:
            key = dumps_canonical([path_value(row, p) for p in node.key_paths])
            rank = tuple(sort_key(path_value(row, p)) for p in node.order_paths)
            if key not in best:
                best[key] = (rank, row)
                order.append(key)
            elif rank > best[key][0]:
                best[key] = (rank, row)
        out_rows = [best[k][1] for k in order]
        return [(node.alias, c) for c in node.columns], out_rows

    def _exec_flatten(self, node: PlanFlatten):
        columns, rows = self._exec(node.input)
        fn = compile_expr(node.expr, columns)
        out_cols = columns + [(node.alias, "value"), (node.alias, "index")]
        out_rows = []
        for row in rows:
            value = fn(row)
            if isinstance(value, list):
                for idx, element in enumerate(value):
                    out_rows.append(row + (element, idx))
        return out_cols, out_rows

    def _exec_join(self, node: PlanJoin):
        left_cols, left_rows = self._exec(node.left)
        right_cols, right_rows = self._exec(node.right)
        columns = left_cols + right_cols
        if node.kind == "cross":
            return columns, [l + r for l in left_rows for r in right_rows]
        on_fn = compile_expr(node.on, columns)
        out = []
        if node.kind == "inner":
            for l in left_rows:
                for r in right_rows:
                    if on_fn(l + r) is True:
                        out.append(l + r)
            return columns, out
        if node.kind == "left":
            null_right = (None,) * len(right_cols)
            for l in left_rows:
                matched = False
                for r in right_rows:
                    if on_fn(l + r) is True:
                        out.append(l + r)
                        matched = True
                if not matched:
                    out.append(l + null_right)
            return columns, out
        raise ExecutionError(f"unknown join kind: {node.kind}")

    def _exec_aggregate(self, node: PlanAggregate):
        columns, rows = self._exec(node.input)
        key_fns = [compile_expr(k, columns) for k in node.keys]
        arg_fns = {}
        for name, kind, expr in node.items:
            if expr is not None and kind != "group":
                arg_fns[name] = compile_expr(expr, columns)
            elif kind == "group":
                arg_fns[name] = compile_expr(expr, columns)

        groups: dict[str, dict] = {}
        group_order: list[str] = []
        for row in rows:
            key_values = [fn(row) for fn in key_fns]
            key = dumps_canonical(key_values)
            state = groups.get(key)
            if state is None:
                state = {"_key_values": key_values, "_rows": 0}
                for name, kind, _e in node.items:
                    state[name] = _agg_init(kind)
                groups[key] = state
                group_order.append(key)
            state["_rows"] += 1
            for name, kind, _e in node.items:
                if kind == "group":
                    if state[name] is _UNSET:
                        state[name] = arg_fns[name](row)
                elif kind == "count_star":
                    state[name] += 1
                else:
                    value = arg_fns[name](row)
                    state[name] = _agg_step(kind, state[name], value)
        if not groups and not node.keys:
            # global aggregate over empty input: one row of identities
            state = {"_key_values": [], "_rows": 0}
            for name, kind, _e in node.items:
                state[name] = _agg_init(kind)
            groups["<empty>"] = state
            group_order.append("<empty>")
        out_rows = []
        for key in group_order:
            state = groups[key]
            out_rows.append(
                tuple(_agg_final(kind, state[name]) for name, kind, _e in node.items)
            )
        out_cols = [("", name) for name, _k, _e in node.items]
        return out_cols, out_rows


class _Unset:
    def __repr__(self):
        return "<unset>"


_UNSET = _Unset()


def _agg_init(kind: str):
    if kind == "count_star" or kind == "count":
        return 0
    if kind == "sum":
        return None
    if kind == "avg":
        return (0, 0.0)  # (count, total)
    if kind in ("min", "max"):
        return None
    if kind == "group":
        return _UNSET
    raise ExecutionError(f"unknown aggregate: {kind}")


def _agg_step(kind: str, state, value):
    if kind == "count":
        return state + (0 if value is None else 1)
    if value is None:
        return state
    if kind == "sum":
        if not _is_num(value):
            return state
        return value if state is None else state + value
    if kind == "avg":
        if not _is_num(value):
            return state
        count, total = state
        return (count + 1, total + value)
    if kind in ("min", "max"):
        if state is None:
            return value
        cmp = variant_compare(value, state)
        if cmp is None:
            return state
        if kind == "min":
            return value if cmp < 0 else state
        return value if cmp > 0 else state
    raise ExecutionError(f"unknown aggregate: {kind}")


def _agg_final(kind: str, state):
    if kind == "group":
        return None if state is _UNSET else state
    if kind == "avg":
        count, total = state
        return None if count == 0 else total / count
    return state
