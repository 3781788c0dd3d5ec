"""Query gateway and sensing: execute under a session, enforce access,
record every statement (success or failure after parse) exactly once.

The record sink is JSONL, one QueryRecord per line, append-only with a
store-wide sequencer; the file itself is ingestable as a stream.
"""

from __future__ import annotations

import os
import threading
import time
from collections import defaultdict
from dataclasses import dataclass

from .access import AccessManager
from .core import Principal
from .errors import AccessDenied, MeshError, SqlSyntaxError
from .sql import extract_dependencies, parse, serialize_plan
from .sql.deps import DependencySet
from .sql.executor import Executor
from .util import dumps_compact, now_rfc3339

RECORDS_FILE = "records.jsonl"


@dataclass(frozen=True)
class Session:
    id: str
    principal: str  # tenant/id ref
    tenant: str
    role: str
    warehouse: str
    started_at: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "principal": self.principal,
            "tenant": self.tenant,
            "role": self.role,
            "warehouse": self.warehouse,
            "started_at": self.started_at,
        }


class WriteEffects:
    """Platform-provided side effects for write statements."""

    def apply(self, session: Session, planned, deps: DependencySet, result) -> int:
        raise NotImplementedError

    def gate_change(self, session: Session, deps: DependencySet, force: bool) -> None:
        """Raise BreakingChange when a gated change lacks force."""


class QueryGateway:
    def __init__(
        self,
        sensing_dir: str,
        catalog_snapshot,
        storage_adapter,
        access: AccessManager,
        effects: WriteEffects | None = None,
        fsync: bool = False,
    ):
        self.sensing_dir = sensing_dir
        self.catalog_snapshot = catalog_snapshot
        self.storage_adapter = storage_adapter
        self.access = access
        self.effects = effects
        self.fsync = fsync
        os.makedirs(sensing_dir, exist_ok=True)
        self._lock = threading.Lock()
        self._seq = self._recover_seq()
        self._session_seq = 0
        self._fh = open(self.records_path(), "a", encoding="utf-8")
        self._usage: dict[str, list[str]] = defaultdict(list)
        self._usage_loaded = False

    def records_path(self) -> str:
        return os.path.join(self.sensing_dir, RECORDS_FILE)

    def _recover_seq(self) -> int:
        path = self.records_path()
        if not os.path.exists(path):
            return 0
        last = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                last += 1
        return last

    # -- sessions ------------------------------------------------------------------

    def open_session(self, principal: Principal, warehouse: str = "default",
                     role: str | None = None) -> Session:
        with self._lock:
            self._session_seq += 1
            sid = f"s{self._session_seq:08d}"
        return Session(
            id=sid,
            principal=principal.ref(),
            tenant=principal.tenant,
            role=role or ("admin" if principal.admin else "member"),
            warehouse=warehouse,
            started_at=now_rfc3339(),
        )

    # -- execution --------------------------------------------------------------------

    def execute(self, session: Session, principal: Principal, sql: str,
                force: bool = False) -> tuple[list[str], list[tuple], dict]:
        """Run one statement; a QueryRecord is persisted on every path."""
        started_at = now_rfc3339()
        t0 = time.perf_counter()
        record = {
            "query_id": None,  # assigned at append time
            "session": session.to_dict(),
            "sql_text": sql,
            "status": "error",
            "error_text": None,
            "started_at": started_at,
            "duration_ms": 0.0,
            "rows_returned": 0,
            "plan": None,
            "dependencies": None,
            "scan_stats": [],
            # captured by richer deployments; unpopulated in this runtime
            "network_resources": None,
            "pipeline_config": None,
        }

        def finish(error: MeshError | None = None):
            record["duration_ms"] = round((time.perf_counter() - t0) * 1000.0, 3)
            if error is not None:
                record["error_text"] = f"{type(error).__name__}: {error.message}"
            self._append(record)
            if error is not None:
                raise error

        try:
            stmt = parse(sql)
        except SqlSyntaxError as exc:
            finish(exc)
        try:
            deps = extract_dependencies(stmt, self.catalog_snapshot, session.tenant)
        except MeshError as exc:
            finish(exc)
        record["dependencies"] = deps.to_dict()

        try:
            self._check_access(session, principal, deps)
            if self.effects is not None and deps.write_mode is not None:
                self.effects.gate_change(session, deps, force)
        except MeshError as exc:
            finish(exc)

        if deps.planned is None:
            try:  # re-plan to surface the PlanError that extraction swallowed
                from .sql import plan_statement

                deps.planned = plan_statement(stmt, self.catalog_snapshot, session.tenant)
            except MeshError as exc:
                finish(exc)
        planned = deps.planned
        record["plan"] = serialize_plan(planned.plan)

        try:
            executor = Executor(self.storage_adapter)
            if deps.write_mode is not None and deps.write_mode != "drop":
                result = executor.run(planned.plan.input)
            elif deps.write_mode == "drop":
                result = None
            else:
                result = executor.run(planned.plan)
            if result is not None:
                record["scan_stats"] = [
                    {"address": s.address, "via_share": s.via_share, **s.stats}
                    for s in executor.scans
                ]
            if deps.write_mode is not None:
                affected = self.effects.apply(session, planned, deps, result)
                record["rows_returned"] = affected
                columns, rows = ([], [])
            else:
                columns, rows = result.columns, result.rows
                record["rows_returned"] = len(rows)
        except MeshError as exc:
            finish(exc)

        record["status"] = "success"
        finish(None)
        return columns, rows, record

    def _check_access(self, session: Session, principal: Principal, deps: DependencySet) -> None:
        for address in sorted(deps.reads):
            if deps.kinds.get(address) == "share":
                continue  # the share node itself is an authorization artifact
            if not self.access.check_access(principal, address, "READ"):
                raise AccessDenied(f"{principal.ref()} lacks READ on {address}")
        if deps.writes is not None:
            target_tenant = deps.writes.split(".")[0]
            if target_tenant != session.tenant:
                raise AccessDenied(
                    f"cross-tenant writes are not allowed (shares are read-only): {deps.writes}"
                )
            if not self.access.check_access(principal, deps.writes, "WRITE"):
                raise AccessDenied(f"{principal.ref()} lacks WRITE on {deps.writes}")

    # -- record sink ----------------------------------------------------------------------

    def _append(self, record: dict) -> None:
        with self._lock:
            self._seq += 1
            record["query_id"] = f"q{self._seq:09d}"
            self._fh.write(dumps_compact(record) + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            if self._usage_loaded:
                self._index_usage(record)

    def record_count(self) -> int:
        with self._lock:
            return self._seq

    def iter_records(self, from_ts: str | None = None, to_ts: str | None = None):
        """Stream records from the sink, filtered by started_at window."""
        import json

        with open(self.records_path(), encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                started = record["started_at"]
                if from_ts is not None and started < from_ts:
                    continue
                if to_ts is not None and started >= to_ts:
                    continue
                yield record

    def query_history(
        self,
        caller: Principal | None = None,
        tenant: str | None = None,
        principal_ref: str | None = None,
        obj: str | None = None,
        from_ts: str | None = None,
        to_ts: str | None = None,
        limit: int | None = None,
    ) -> list[dict]:
        """Filtered history, stable-ordered by (started_at, query_id).

        Callers see their own sessions plus records touching objects they
        hold MANAGE on (ownership); tenant admins see their tenant.
        """
        out = []
        for record in self.iter_records(from_ts, to_ts):
            session = record["session"]
            if tenant is not None and session["tenant"] != tenant:
                continue
            if principal_ref is not None and session["principal"] != principal_ref:
                continue
            touched = set((record.get("dependencies") or {}).get("reads", []))
            writes = (record.get("dependencies") or {}).get("writes")
            if writes:
                touched.add(writes)
            if obj is not None and obj not in touched:
                continue
            if caller is not None and not self._may_see(caller, session, touched):
                continue
            out.append(record)
        out.sort(key=lambda r: (r["started_at"], r["query_id"]))
        if limit is not None:
            out = out[:limit]
        return out

    def _may_see(self, caller: Principal, session: dict, touched: set) -> bool:
        if session["principal"] == caller.ref():
            return True
        if caller.admin and session["tenant"] == caller.tenant:
            return True
        return any(self.access.check_access(caller, address, "MANAGE") for address in touched)

    # -- usage index (marketplace ranking) ---------------------------------------------------

    def _index_usage(self, record: dict) -> None:
        deps = record.get("dependencies") or {}
        touched = set(deps.get("reads", []))
        if deps.get("writes"):
            touched.add(deps["writes"])
        for address in touched:
            self._usage[address].append(record["started_at"])

    def _ensure_usage_loaded(self) -> None:
        with self._lock:
            if self._usage_loaded:
                return
            self._usage_loaded = True
        for record in self.iter_records():
            self._index_usage(record)

    def usage_count(self, address: str, from_ts: str) -> int:
        """Queries touching address since from_ts (inclusive)."""
        self._ensure_usage_loaded()
        times = self._usage.get(address, [])
        return sum(1 for t in times if t >= from_ts)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
