"""Dependency extraction: which objects a statement reads and writes.

Views expand recursively (with cycle detection) so reads contain the view
address alongside every base object it resolves to; objects reached through
a share contribute both the share node and the producer object. Pushed
predicate statistics and column usage come from planning the statement
against the same snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import PlanError, UnknownObject, ViewCycle
from .ast import (
    CreateTableAs,
    CreateViewAs,
    Drop,
    FromSubquery,
    FromTable,
    InsertSelect,
    Select,
    Statement,
)
from .catalog import CatalogSnapshot, resolve_write_target
from .parser import parse
from .planner import PlannedStatement, PredicateStat, plan_statement


@dataclass
class DependencySet:
    reads: set = field(default_factory=set)  # qualified addresses (views, tables, shares)
    writes: str | None = None
    write_mode: str | None = None  # ctas | create_view | insert | drop
    columns_read: set = field(default_factory=set)  # (address, column-or-path)
    predicates: list = field(default_factory=list)  # PredicateStat
    shares: set = field(default_factory=set)  # share addresses (subset of reads)
    kinds: dict = field(default_factory=dict)  # address -> table | view | share
    planned: PlannedStatement | None = None

    def to_dict(self) -> dict:
        return {
            "reads": sorted(self.reads),
            "writes": self.writes,
            "write_mode": self.write_mode,
            "columns_read": sorted([list(c) for c in self.columns_read]),
            "predicates": [p.to_dict() for p in self.predicates],
            "shares": sorted(self.shares),
            "kinds": {k: self.kinds[k] for k in sorted(self.kinds)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DependencySet":
        deps = cls()
        deps.reads = set(doc.get("reads", []))
        deps.writes = doc.get("writes")
        deps.write_mode = doc.get("write_mode")
        deps.columns_read = {tuple(c) for c in doc.get("columns_read", [])}
        deps.predicates = [
            PredicateStat(p["address"], p["path"], p["op"], p.get("literal_bound", True))
            for p in doc.get("predicates", [])
        ]
        deps.shares = set(doc.get("shares", []))
        deps.kinds = dict(doc.get("kinds", {}))
        return deps


def extract_dependencies(
    stmt: Statement, catalog: CatalogSnapshot, session_tenant: str
) -> DependencySet:
    deps = DependencySet()
    stack: list[str] = []

    def walk_select(select: Select, tenant: str, ctes: frozenset):
        local = set(ctes)
        for cte in select.ctes:
            walk_select(cte.select, tenant, frozenset(local))
            local.add(cte.name)
        for element in select.from_elements:
            item = element.item
            if isinstance(item, FromSubquery):
                walk_select(item.select, tenant, frozenset(local))
            elif isinstance(item, FromTable):
                if len(item.parts) == 1 and item.parts[0] in local:
                    continue
                resolve_ref(item.parts, tenant)

    def resolve_ref(parts: tuple[str, ...], tenant: str):
        resolved = catalog.lookup(parts, tenant)
        if resolved is None:
            raise UnknownObject(f"unknown object: {'.'.join(parts)}")
        deps.reads.add(resolved.address)
        deps.kinds[resolved.address] = resolved.kind
        if resolved.via_share:
            deps.reads.add(resolved.via_share)
            deps.shares.add(resolved.via_share)
            deps.kinds[resolved.via_share] = "share"
        if resolved.kind == "view":
            if resolved.address in stack:
                raise ViewCycle(" -> ".join(stack + [resolved.address]))
            stack.append(resolved.address)
            try:
                view_tenant = resolved.address.split(".")[0]
                if resolved.native is not None:
                    resolve_ref(tuple(resolved.native["base"].split(".")), view_tenant)
                else:
                    view_stmt = parse(resolved.view_sql)
                    walk_select(view_stmt, view_tenant, frozenset())
            finally:
                stack.pop()

    if isinstance(stmt, Select):
        walk_select(stmt, session_tenant, frozenset())
    elif isinstance(stmt, (CreateTableAs, CreateViewAs, InsertSelect)):
        walk_select(stmt.select, session_tenant, frozenset())
        deps.writes = resolve_write_target(stmt.parts, session_tenant, catalog)
        deps.write_mode = {
            CreateTableAs: "ctas",
            CreateViewAs: "create_view",
            InsertSelect: "insert",
        }[type(stmt)]
    elif isinstance(stmt, Drop):
        deps.writes = resolve_write_target(stmt.parts, session_tenant, catalog)
        deps.write_mode = "drop"
    else:
        raise PlanError(f"unsupported statement: {type(stmt).__name__}")

    try:
        planned = plan_statement(stmt, catalog, session_tenant)
        deps.planned = planned
        deps.columns_read = planned.columns_read
        deps.predicates = planned.predicates
    except PlanError:
        deps.planned = None
    return deps
