"""Logical planner: resolved, deterministic operator trees with predicate
pushdown to scans (the statistics basis for pruning and the usage advisor).

Plans serialize to a stable JSON form (plan_format 1); expressions are
embedded in their canonical printed text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import PlanError, SqlSyntaxError, UnknownObject, ViewCycle
from .ast import (
    BinaryOp,
    Cast,
    ColumnRef,
    CreateTableAs,
    CreateViewAs,
    Cte,
    Drop,
    FromElement,
    FromFlatten,
    FromSubquery,
    FromTable,
    FuncCall,
    InsertSelect,
    IsNull,
    Literal,
    Select,
    SelectItem,
    Star,
    Statement,
    UnaryOp,
    print_expr,
)
from .catalog import CatalogSnapshot, ResolvedObject, resolve_write_target
from .parser import parse

PLAN_FORMAT_VERSION = 1

AGG_FUNCS = ("COUNT", "SUM", "MIN", "MAX", "AVG")

_FLIP = {"=": "=", "<": ">", ">": "<", "<=": ">=", ">=": "<="}


@dataclass
class PushedTerm:
    path: str
    op: str  # = < > <= >= is_null
    value: object = None

    def to_dict(self) -> dict:
        return {"path": self.path, "op": self.op, "value": self.value}


@dataclass
class PredicateStat:
    address: str
    path: str
    op: str
    literal_bound: bool = True

    def to_dict(self) -> dict:
        return {
            "address": self.address,
            "path": self.path,
            "op": self.op,
            "literal_bound": self.literal_bound,
        }


@dataclass
class PlanScan:
    address: str
    alias: str
    columns: tuple[str, ...]
    pushed: list[PushedTerm] = field(default_factory=list)
    via_share: str | None = None


@dataclass
class PlanSubquery:
    input: object
    alias: str
    columns: tuple[str, ...]


@dataclass
class PlanDedup:
    input: object
    alias: str
    columns: tuple[str, ...]
    key_paths: tuple[str, ...]
    order_paths: tuple[str, ...]


@dataclass
class PlanFlatten:
    input: object
    expr: object
    alias: str


@dataclass
class PlanJoin:
    kind: str  # cross | inner | left
    left: object
    right: object
    on: object | None = None


@dataclass
class PlanFilter:
    input: object
    expr: object


@dataclass
class PlanProject:
    input: object
    items: tuple  # tuple[(name, Expr)]


@dataclass
class PlanAggregate:
    input: object
    keys: tuple  # tuple[Expr]
    items: tuple  # tuple[(name, kind, Expr|None)]; kind: group|count_star|count|sum|min|max|avg


@dataclass
class PlanSort:
    input: object
    keys: tuple  # tuple[(Expr, descending)]


@dataclass
class PlanLimit:
    input: object
    n: int


@dataclass
class PlanWrite:
    mode: str  # ctas | create_view | insert | drop
    target: str
    input: object | None
    view_sql: str | None = None
    drop_kind: str | None = None


def plan_to_dict(node) -> dict | None:
    if node is None:
        return None  # FROM-less select: one empty row
    if isinstance(node, PlanScan):
        return {
            "op": "scan",
            "address": node.address,
            "alias": node.alias,
            "columns": list(node.columns),
            "pushed": [t.to_dict() for t in node.pushed],
            "via_share": node.via_share,
        }
    if isinstance(node, PlanSubquery):
        return {
            "op": "subquery",
            "alias": node.alias,
            "columns": list(node.columns),
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanDedup):
        return {
            "op": "dedup",
            "alias": node.alias,
            "columns": list(node.columns),
            "keys": list(node.key_paths),
            "order": list(node.order_paths),
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanFlatten):
        return {
            "op": "flatten",
            "alias": node.alias,
            "expr": print_expr(node.expr),
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanJoin):
        return {
            "op": "join",
            "kind": node.kind,
            "on": print_expr(node.on) if node.on is not None else None,
            "left": plan_to_dict(node.left),
            "right": plan_to_dict(node.right),
        }
    if isinstance(node, PlanFilter):
        return {"op": "filter", "expr": print_expr(node.expr), "input": plan_to_dict(node.input)}
    if isinstance(node, PlanProject):
        return {
            "op": "project",
            "items": [{"name": n, "expr": print_expr(e)} for n, e in node.items],
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanAggregate):
        return {
            "op": "aggregate",
            "keys": [print_expr(k) for k in node.keys],
            "items": [
                {"name": n, "kind": k, "expr": print_expr(e) if e is not None else None}
                for n, k, e in node.items
            ],
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanSort):
        return {
            "op": "sort",
            "keys": [{"expr": print_expr(e), "desc": d} for e, d in node.keys],
            "input": plan_to_dict(node.input),
        }
    if isinstance(node, PlanLimit):
        return {"op": "limit", "n": node.n, "input": plan_to_dict(node.input)}
    if isinstance(node, PlanWrite):
        return {
            "op": "write",
            "mode": node.mode,
            "target": node.target,
            "input": plan_to_dict(node.input) if node.input is not None else None,
        }
    raise TypeError(f"unserializable plan node: {node!r}")


def serialize_plan(node) -> dict:
    return {"plan_format": PLAN_FORMAT_VERSION, "root": plan_to_dict(node)}


@dataclass
class PlannedStatement:
    plan: object
    output_columns: tuple[str, ...]
    predicates: list[PredicateStat]
    columns_read: set  # set[(address, column-or-path)]


class _Scope:
    """Bindings visible in one SELECT level."""

    def __init__(self):
        self.bindings: list[tuple[str, tuple[str, ...], bool, PlanScan | None]] = []
        # (alias, columns, pushable, scan_node)

    def add(self, alias: str, columns: tuple[str, ...], pushable: bool, scan: PlanScan | None):
        if any(b[0] == alias for b in self.bindings):
            raise PlanError(f"duplicate alias in FROM: {alias}")
        self.bindings.append((alias, columns, pushable, scan))

    def all_columns(self) -> list[tuple[str, str]]:
        return [(alias, col) for alias, cols, _p, _s in self.bindings for col in cols]

    def resolve(self, parts: tuple[str, ...]) -> tuple[str, str]:
        """Resolve a column ref to (alias, column); raises PlanError."""
        if len(parts) == 1:
            matches = [
                (alias, parts[0])
                for alias, cols, _p, _s in self.bindings
                if parts[0] in cols
            ]
            if len(matches) == 1:
                return matches[0]
            if not matches:
                raise PlanError(f"unknown column: {parts[0]}")
            raise PlanError(f"ambiguous column: {parts[0]}")
        if len(parts) == 2:
            for alias, cols, _p, _s in self.bindings:
                if alias == parts[0]:
                    if parts[1] in cols:
                        return (alias, parts[1])
                    raise PlanError(f"unknown column: {parts[0]}.{parts[1]}")
            raise PlanError(f"unknown alias: {parts[0]}")
        raise PlanError(f"column references use at most alias.name: {'.'.join(parts)}")


class Planner:
    def __init__(self, catalog: CatalogSnapshot, session_tenant: str):
        self.catalog = catalog
        self.tenant = session_tenant
        self.predicates: list[PredicateStat] = []
        self.columns_read: set = set()
        self._view_stack: list[str] = []

    # -- statement entry ------------------------------------------------------

    def plan_statement(self, stmt: Statement) -> PlannedStatement:
        if isinstance(stmt, Select):
            node, columns = self.plan_select(stmt, {})
            return PlannedStatement(node, columns, self.predicates, self.columns_read)
        if isinstance(stmt, CreateTableAs):
            inner, columns = self.plan_select(stmt.select, {})
            target = resolve_write_target(stmt.parts, self.tenant, self.catalog)
            return PlannedStatement(
                PlanWrite("ctas", target, inner), columns, self.predicates, self.columns_read
            )
        if isinstance(stmt, CreateViewAs):
            inner, columns = self.plan_select(stmt.select, {})
            target = resolve_write_target(stmt.parts, self.tenant, self.catalog)
            from .ast import print_select

            return PlannedStatement(
                PlanWrite("create_view", target, inner, view_sql=print_select(stmt.select)),
                columns,
                self.predicates,
                self.columns_read,
            )
        if isinstance(stmt, InsertSelect):
            inner, columns = self.plan_select(stmt.select, {})
            target = resolve_write_target(stmt.parts, self.tenant, self.catalog)
            return PlannedStatement(
                PlanWrite("insert", target, inner), columns, self.predicates, self.columns_read
            )
        if isinstance(stmt, Drop):
            target = resolve_write_target(stmt.parts, self.tenant, self.catalog)
            return PlannedStatement(
                PlanWrite("drop", target, None, drop_kind=stmt.kind),
                (),
                self.predicates,
                self.columns_read,
            )
        raise PlanError(f"unplannable statement: {type(stmt).__name__}")

    # -- select ------------------------------------------------------------------

    def plan_select(self, select: Select, outer_ctes: dict) -> tuple[object, tuple[str, ...]]:
        ctes = dict(outer_ctes)
        for cte in select.ctes:
            node, columns = self.plan_select(cte.select, ctes)
            ctes[cte.name] = (node, columns)

        scope = _Scope()
        tree = None
        for i, element in enumerate(select.from_elements):
            tree = self._add_from_element(tree, element, scope, ctes, first=(i == 0))

        residual = None
        if select.where is not None:
            conjuncts = _split_and(select.where)
            kept = []
            for conj in conjuncts:
                if not self._try_push(conj, scope):
                    kept.append(conj)
            for conj in kept:
                residual = conj if residual is None else BinaryOp("AND", residual, conj)
        if tree is None and select.from_elements:
            raise PlanError("empty FROM clause")
        node = tree
        if residual is not None:
            self._check_expr(residual, scope)
            node = PlanFilter(node, residual)

        has_agg = select.group_by or any(
            isinstance(i, SelectItem) and _contains_agg(i.expr) for i in select.items
        )
        if has_agg:
            for expr in select.group_by:
                self._check_expr(expr, scope)
            node, out_columns = self._plan_aggregate(select, node, scope)
        else:
            for item in select.items:
                if isinstance(item, SelectItem):
                    self._check_expr(item.expr, scope)
            items = self._expand_items(select.items, scope)
            node = PlanProject(node, tuple(items))
            out_columns = tuple(name for name, _ in items)

        if select.order_by:
            out_scope = _Scope()
            out_scope.add("", out_columns, False, None)
            keys = []
            for order in select.order_by:
                self._check_expr(order.expr, out_scope, record=False)
                keys.append((order.expr, order.descending))
            node = PlanSort(node, tuple(keys))
        if select.limit is not None:
            node = PlanLimit(node, select.limit)
        return node, out_columns

    # -- FROM -------------------------------------------------------------------

    def _add_from_element(self, tree, element: FromElement, scope: _Scope, ctes, first: bool):
        item = element.item
        if isinstance(item, FromFlatten):
            if element.join != "cross":
                raise PlanError("FLATTEN combines with ',' (lateral), not JOIN")
            if tree is None:
                raise PlanError("FLATTEN needs a preceding FROM item")
            self._check_expr(item.expr, scope)
            scope.add(item.alias, ("value", "index"), False, None)
            return PlanFlatten(tree, item.expr, item.alias)

        node, columns, scan = self._plan_from_item(item, ctes)
        if first:
            scope.add(_binding(item), columns, scan is not None, scan)
            return node
        if element.join == "cross":
            scope.add(_binding(item), columns, scan is not None, scan)
            return PlanJoin("cross", tree, node)
        if element.join == "inner":
            scope.add(_binding(item), columns, scan is not None, scan)
            joined = PlanJoin("inner", tree, node, element.on)
            self._check_expr(element.on, scope)
            return joined
        if element.join == "left":
            # right side of a LEFT JOIN is not filter-pushable
            scope.add(_binding(item), columns, False, None)
            joined = PlanJoin("left", tree, node, element.on)
            self._check_expr(element.on, scope)
            return joined
        raise PlanError(f"unsupported join kind: {element.join}")

    def _plan_from_item(self, item, ctes) -> tuple[object, tuple[str, ...], PlanScan | None]:
        if isinstance(item, FromSubquery):
            node, columns = self.plan_select(item.select, ctes)
            return PlanSubquery(node, item.alias, columns), columns, None
        if isinstance(item, FromTable):
            binding = item.binding()
            if len(item.parts) == 1 and item.parts[0] in ctes:
                node, columns = ctes[item.parts[0]]
                return PlanSubquery(node, binding, columns), columns, None
            resolved = self.catalog.lookup(item.parts, self.tenant)
            if resolved is None:
                raise UnknownObject(f"unknown object: {'.'.join(item.parts)}")
            return self._plan_resolved(resolved, binding)
        raise PlanError(f"unsupported FROM item: {type(item).__name__}")

    def _plan_resolved(self, resolved: ResolvedObject, binding: str):
        if resolved.kind == "table":
            scan = PlanScan(
                address=resolved.address,
                alias=binding,
                columns=resolved.columns,
                via_share=resolved.via_share,
            )
            return scan, resolved.columns, scan
        if resolved.kind == "view":
            if resolved.address in self._view_stack:
                raise ViewCycle(" -> ".join(self._view_stack + [resolved.address]))
            self._view_stack.append(resolved.address)
            try:
                if resolved.native is not None:
                    node, columns = self._plan_native_view(resolved, binding)
                else:
                    try:
                        view_stmt = parse(resolved.view_sql)
                    except SqlSyntaxError as exc:
                        raise PlanError(f"stored view {resolved.address} unparseable: {exc.message}")
                    if not isinstance(view_stmt, Select):
                        raise PlanError(f"stored view {resolved.address} is not a SELECT")
                    view_tenant = resolved.address.split(".")[0]
                    saved, self.tenant = self.tenant, view_tenant
                    try:
                        node, columns = self.plan_select(view_stmt, {})
                    finally:
                        self.tenant = saved
            finally:
                self._view_stack.pop()
            return PlanSubquery(node, binding, columns), columns, None
        raise PlanError(f"object is not queryable: {resolved.address} ({resolved.kind})")

    def _plan_native_view(self, resolved: ResolvedObject, binding: str):
        native = resolved.native
        base = self.catalog.lookup(tuple(native["base"].split(".")), self.tenant)
        if base is None or base.kind != "table":
            raise UnknownObject(f"native view base missing: {native['base']}")
        scan = PlanScan(address=base.address, alias=binding, columns=base.columns,
                        via_share=base.via_share)
        for col in base.columns:
            self.columns_read.add((base.address, col))
        dedup = PlanDedup(
            input=scan,
            alias=binding,
            columns=base.columns,
            key_paths=tuple(native["keys"]),
            order_paths=tuple(native["order"]),
        )
        return dedup, base.columns

    # -- WHERE pushdown --------------------------------------------------------------

    def _try_push(self, conj, scope: _Scope) -> bool:
        spec = self._pushable_term(conj, scope)
        if spec is None:
            return False
        scan, term = spec
        scan.pushed.append(term)
        self.predicates.append(
            PredicateStat(
                address=scan.address,
                path=term.path,
                op="IS NULL" if term.op == "is_null" else term.op,
            )
        )
        self.columns_read.add((scan.address, term.path))
        return True

    def _pushable_term(self, expr, scope: _Scope):
        if isinstance(expr, IsNull) and not expr.negated:
            target = self._scan_path(expr.expr, scope)
            if target is not None:
                scan, path = target
                return scan, PushedTerm(path, "is_null")
            return None
        if isinstance(expr, BinaryOp) and expr.op in ("=", "<", ">", "<=", ">="):
            left_path = self._scan_path(expr.left, scope)
            if left_path is not None and isinstance(expr.right, Literal) and expr.right.value is not None:
                scan, path = left_path
                return scan, PushedTerm(path, expr.op, expr.right.value)
            right_path = self._scan_path(expr.right, scope)
            if right_path is not None and isinstance(expr.left, Literal) and expr.left.value is not None:
                scan, path = right_path
                return scan, PushedTerm(path, _FLIP[expr.op], expr.left.value)
        return None

    def _scan_path(self, expr, scope: _Scope):
        """(scan, store path) when expr addresses a pushable base-table scan."""
        if isinstance(expr, ColumnRef):
            try:
                alias, column = scope.resolve(expr.parts)
            except PlanError:
                return None
            for b_alias, _cols, pushable, scan in scope.bindings:
                if b_alias == alias:
                    if pushable and scan is not None:
                        return scan, column
                    return None
            return None
        if (
            isinstance(expr, FuncCall)
            and expr.name == "JSON_GET"
            and len(expr.args) == 2
            and isinstance(expr.args[0], ColumnRef)
            and isinstance(expr.args[1], Literal)
            and isinstance(expr.args[1].value, str)
        ):
            base = self._scan_path(expr.args[0], scope)
            if base is None:
                return None
            scan, column = base
            return scan, f"{column}.{expr.args[1].value}"
        return None

    # -- aggregates ---------------------------------------------------------------------

    def _plan_aggregate(self, select: Select, node, scope: _Scope):
        keys = tuple(select.group_by)
        items = []
        names = []
        for i, item in enumerate(select.items):
            if isinstance(item, Star):
                raise PlanError("* cannot be combined with GROUP BY/aggregates")
            name = item.alias or _default_name(item.expr, i)
            expr = item.expr
            if _contains_agg(expr):
                if not isinstance(expr, FuncCall) or expr.name not in AGG_FUNCS:
                    raise PlanError("aggregates must be top-level select items")
                if expr.star:
                    items.append((name, "count_star", None))
                else:
                    if len(expr.args) != 1:
                        raise PlanError(f"{expr.name} takes exactly one argument")
                    self._check_expr(expr.args[0], scope)
                    items.append((name, expr.name.lower(), expr.args[0]))
            else:
                if expr not in keys:
                    raise PlanError(
                        f"column {print_expr(expr)} must appear in GROUP BY or an aggregate"
                    )
                items.append((name, "group", expr))
            names.append(name)
        if len(set(names)) != len(names):
            raise PlanError(f"duplicate output column names: {names}")
        return PlanAggregate(node, keys, tuple(items)), tuple(names)

    def _expand_items(self, items, scope: _Scope):
        out = []
        position = 0
        for item in items:
            if isinstance(item, Star):
                bindings = scope.bindings
                if item.qualifier is not None:
                    bindings = [b for b in bindings if b[0] == item.qualifier]
                    if not bindings:
                        raise PlanError(f"unknown alias: {item.qualifier}")
                for alias, cols, _p, scan in bindings:
                    for col in cols:
                        out.append((col, ColumnRef((alias, col))))
                        if scan is not None:
                            self.columns_read.add((scan.address, col))
                        position += 1
            else:
                name = item.alias or _default_name(item.expr, position)
                out.append((name, item.expr))
                position += 1
        if not out:
            raise PlanError("empty select list")
        return out

    # -- expression checking -----------------------------------------------------------

    def _check_expr(self, expr, scope: _Scope, record: bool = True) -> None:
        """Resolve every column reference (errors early) and record usage."""
        if isinstance(expr, ColumnRef):
            alias, column = scope.resolve(expr.parts)
            if record:
                for b_alias, _cols, _p, scan in scope.bindings:
                    if b_alias == alias and scan is not None:
                        self.columns_read.add((scan.address, column))
            return
        if isinstance(expr, Literal):
            return
        if isinstance(expr, FuncCall):
            if expr.name in AGG_FUNCS:
                raise PlanError(f"aggregate {expr.name} not allowed here")
            if expr.name == "JSON_GET" and record and len(expr.args) == 2:
                if (
                    isinstance(expr.args[0], ColumnRef)
                    and isinstance(expr.args[1], Literal)
                    and isinstance(expr.args[1].value, str)
                ):
                    try:
                        alias, column = scope.resolve(expr.args[0].parts)
                    except PlanError:
                        alias = None
                    if alias is not None:
                        for b_alias, _cols, _p, scan in scope.bindings:
                            if b_alias == alias and scan is not None:
                                self.columns_read.add(
                                    (scan.address, f"{column}.{expr.args[1].value}")
                                )
            for arg in expr.args:
                self._check_expr(arg, scope, record)
            return
        if isinstance(expr, Cast):
            self._check_expr(expr.expr, scope, record)
            return
        if isinstance(expr, BinaryOp):
            self._check_expr(expr.left, scope, record)
            self._check_expr(expr.right, scope, record)
            return
        if isinstance(expr, UnaryOp):
            self._check_expr(expr.expr, scope, record)
            return
        if isinstance(expr, IsNull):
            self._check_expr(expr.expr, scope, record)
            return
        if isinstance(expr, Star):
            raise PlanError("* is not a value expression")
        raise PlanError(f"unsupported expression: {expr!r}")


def _binding(item) -> str:
    return item.binding()


def _split_and(expr) -> list:
    if isinstance(expr, BinaryOp) and expr.op == "AND":
        return _split_and(expr.left) + _split_and(expr.right)
    return [expr]


def _contains_agg(expr) -> bool:
    if isinstance(expr, FuncCall):
        if expr.name in AGG_FUNCS:
            return True
        return any(_contains_agg(a) for a in expr.args)
    if isinstance(expr, BinaryOp):
        return _contains_agg(expr.left) or _contains_agg(expr.right)
    if isinstance(expr, UnaryOp):
        return _contains_agg(expr.expr)
    if isinstance(expr, IsNull):
        return _contains_agg(expr.expr)
    if isinstance(expr, Cast):
        return _contains_agg(expr.expr)
    return False


def _default_name(expr, position: int) -> str:
    if isinstance(expr, ColumnRef):
        return expr.parts[-1]
    if isinstance(expr, FuncCall):
        return expr.name.lower()
    if isinstance(expr, Cast) and isinstance(expr.expr, (ColumnRef, FuncCall)):
        return _default_name(expr.expr, position)
    return f"col{position + 1}"


def plan_statement(stmt: Statement, catalog: CatalogSnapshot, session_tenant: str) -> PlannedStatement:
    return Planner(catalog, session_tenant).plan_statement(stmt)
