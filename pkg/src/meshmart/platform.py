"""The assembled platform: one object wiring metadata, storage, ingestion,
SQL, sensing, lineage, marketplace, advisor, PII, and access control over a
single data directory. The REST layer and CLI are thin shells over this.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import threading

from .access import AccessManager
from .advisor import Advisor
from .config import PlatformConfig
from .core import (
    Catalog,
    MetadataStore,
    ObjectKind,
    Principal,
    SYS_PREFIX,
    make_address,
    parse_qualified,
)
from .errors import (
    AccessDenied,
    BreakingChange,
    DuplicateObject,
    ExecutionError,
    NameCollision,
    NotFound,
    TypeMismatch,
    Unauthenticated,
    UnknownObject,
)
from .fieldtypes import BOTTOM, join, scalar_type_of
from .inference import generate_view_models, infer_schema
from .ingest import StreamManager
from .lineage import LineageService
from .marketplace import Marketplace
from .pii import PiiScanner, load_ruleset
from .sensing import QueryGateway, Session, WriteEffects
from .sql import ResolvedObject
from .sql.deps import DependencySet
from .store import Column, PredicateTerm, TableStore
from .util import dumps_compact, now_rfc3339

APIKEY_PREFIX = f"{SYS_PREFIX}apikey/"


def _hash_key(raw: str) -> str:
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


class PlatformCatalogSnapshot:
    """Name resolution for the SQL frontend: session-relative first, then
    explicit tenant; cross-tenant hits record the covering share."""

    def __init__(self, platform: "Platform"):
        self.platform = platform

    def lookup(self, parts: tuple[str, ...], session_tenant: str) -> ResolvedObject | None:
        candidates = []
        if 2 <= len(parts) <= 3:
            candidates.append(f"{session_tenant}." + ".".join(parts))
        if 3 <= len(parts) <= 4:
            candidates.append(".".join(parts))
        for qualified in candidates:
            found = self.platform.catalog.try_resolve(qualified)
            if found is None:
                continue
            address, rec = found
            body = rec.body
            via_share = None
            if address.tenant != session_tenant:
                via_share = self.platform.access.share_covering(qualified, session_tenant)
            if address.kind == ObjectKind.TABLE:
                table = self.platform.tables.get(qualified)
                return ResolvedObject(
                    address=qualified,
                    kind="table",
                    columns=tuple(table.column_names()),
                    via_share=via_share,
                    tenant=address.tenant,
                )
            if address.kind == ObjectKind.VIEW:
                return ResolvedObject(
                    address=qualified,
                    kind="view",
                    columns=tuple(body.get("columns", [])),
                    view_sql=body.get("view_sql"),
                    native=body.get("native"),
                    via_share=via_share,
                    tenant=address.tenant,
                )
            return None
        return None


class PlatformStorageAdapter:
    def __init__(self, platform: "Platform"):
        self.platform = platform

    def scan(self, address: str, pushed, via_share):
        table = self.platform.tables.get(address)
        terms = [PredicateTerm(t.path, t.op, t.value) for t in pushed]
        rows, stats = table.scan(predicate=terms)
        return rows, stats.to_dict()


def _column_type_for(values) -> str:
    joined = BOTTOM
    for value in values:
        joined = join(joined, scalar_type_of(value))
    if joined.kind in ("BOOL", "INT", "FLOAT", "STRING"):
        return joined.kind
    return "VARIANT"


class PlatformWriteEffects(WriteEffects):
    def __init__(self, platform: "Platform"):
        self.platform = platform

    def gate_change(self, session: Session, deps: DependencySet, force: bool) -> None:
        """Breaking changes on shared objects are advisory-blocking: refused
        without force; with force, consumers are notified."""
        target = deps.writes
        if deps.write_mode not in ("drop", "create_view") or target is None:
            return
        platform = self.platform
        existing = platform.catalog.try_resolve(target)
        if existing is None:
            return
        shares = platform.access.shares_covering_object(target)
        if not shares:
            return
        if deps.write_mode == "drop":
            violations = [{"kind": "dropped_object", "object": target}]
        else:
            violations = []
            for share in shares:
                verdict = platform.access.verify_share_compatibility(
                    share["id"], {"object": target, "view_sql": "<redefinition>"},
                    view_reads=set(deps.reads) - {target},
                )
                violations.extend(verdict.violations)
            if not violations:
                return
        if not force:
            raise BreakingChange(
                f"change to shared object {target} is breaking: {violations}; "
                f"re-run with force to acknowledge and notify consumers"
            )
        for share in shares:
            platform.notify(
                share["consumer"],
                {
                    "type": "breaking_change",
                    "object": target,
                    "share": share["id"],
                    "violations": violations,
                    "forced_by": session.principal,
                },
            )

    def apply(self, session: Session, planned, deps: DependencySet, result) -> int:
        platform = self.platform
        mode = deps.write_mode
        target = deps.writes
        derived_from = sorted(a for a in deps.reads if deps.kinds.get(a) != "share")
        if mode == "ctas":
            address = parse_qualified(target, ObjectKind.TABLE)
            columns = []
            for i, name in enumerate(result.columns):
                columns.append(Column(name, _column_type_for([r[i] for r in result.rows])))
            platform.catalog.register_object(
                address,
                {
                    "derived_from": derived_from,
                    "created_by": session.principal,
                    "columns": [{"name": c.name, "type": c.type} for c in columns],
                },
            )
            table = platform.tables.create_table(address, columns)
            table.append_rows([tuple(r) for r in result.rows])
            return len(result.rows)
        if mode == "create_view":
            address = parse_qualified(target, ObjectKind.VIEW)
            existing = platform.catalog.try_resolve(target)
            if existing is not None:
                if existing[0].kind != ObjectKind.VIEW:
                    raise DuplicateObject(f"address in use by a {existing[0].kind.value}: {target}")
                platform.catalog.drop_object(existing[0])  # gated redefinition
            platform.catalog.register_object(
                address,
                {
                    "view_sql": planned.plan.view_sql,
                    "columns": list(result.columns),
                    "derived_from": derived_from,
                    "created_by": session.principal,
                },
            )
            return 0
        if mode == "insert":
            found = platform.catalog.try_resolve(target)
            if found is None:
                raise UnknownObject(f"no such table: {target}")
            address, _rec = found
            if address.kind != ObjectKind.TABLE:
                raise ExecutionError(f"INSERT target is not a table: {target}")
            table = platform.tables.get(target)
            if len(result.columns) != len(table.columns):
                raise TypeMismatch(
                    f"INSERT arity {len(result.columns)} != table arity {len(table.columns)}"
                )
            table.append_rows([tuple(r) for r in result.rows])
            return len(result.rows)
        if mode == "drop":
            found = platform.catalog.try_resolve(target)
            if found is None:
                raise UnknownObject(f"no such object: {target}")
            address, rec = found
            drop_kind = planned.plan.drop_kind
            if drop_kind == "table" and address.kind != ObjectKind.TABLE:
                raise UnknownObject(f"not a table: {target}")
            if drop_kind == "view" and address.kind != ObjectKind.VIEW:
                raise UnknownObject(f"not a view: {target}")
            platform.catalog.drop_object(address)
            if address.kind == ObjectKind.TABLE:
                platform.tables.drop(address)
            return 0
        raise ExecutionError(f"unknown write mode: {mode}")


class Platform:
    def __init__(self, config: PlatformConfig):
        self.config = config.validate()
        data_dir = config.data_dir
        os.makedirs(data_dir, exist_ok=True)
        self.meta = MetadataStore(os.path.join(data_dir, "meta"), fsync=config.fsync)
        self.catalog = Catalog(self.meta)
        self.tables = TableStore(
            data_dir,
            block_size=config.block_size,
            retention_days=config.retention_days,
            fsync=config.fsync,
            max_depth=config.max_variant_depth,
        )
        self.streams = StreamManager(
            os.path.join(data_dir, "staging"),
            self.catalog,
            self.tables,
            seal_bytes=config.staging_seal_bytes,
            seal_age_s=config.staging_seal_age_s,
            max_depth=config.max_variant_depth,
        )
        self.access = AccessManager(self.catalog)
        self.snapshot = PlatformCatalogSnapshot(self)
        self.storage = PlatformStorageAdapter(self)
        self.effects = PlatformWriteEffects(self)
        self.gateway = QueryGateway(
            os.path.join(data_dir, "sensing"),
            self.snapshot,
            self.storage,
            self.access,
            effects=self.effects,
        )
        self.lineage = LineageService(self.gateway, self.catalog, config.lineage_query_node_cap)
        self.marketplace = Marketplace(
            self.catalog,
            self.tables,
            self.access,
            self.gateway,
            min_description_chars=config.stability_min_description_chars,
            preview_budget_ms=config.stability_preview_budget_ms,
            usage_window_days=config.search_usage_window_days,
        )
        self.advisor = Advisor(
            self.catalog,
            self.tables,
            self.gateway,
            self.access,
            top_share_threshold=config.advisor_top_share_threshold,
            min_queries=config.advisor_min_queries,
            cooldown_days=config.advisor_cooldown_days,
            inbox_append=self.notify,
        )
        self.pii = PiiScanner(
            self.catalog,
            self.tables,
            self.access,
            ruleset=load_ruleset(config.pii_ruleset_path or None),
            value_fraction_threshold=config.pii_value_fraction_threshold,
            sample_n=config.pii_sample_n,
        )
        self._inbox_lock = threading.Lock()
        self._background_threads: list[threading.Thread] = []
        self._stop_background = threading.Event()
        self._bootstrap()

    # -- bootstrap & identity -----------------------------------------------------------

    def _bootstrap(self) -> None:
        try:
            self.catalog.get_tenant("platform")
        except NotFound:
            self.catalog.create_tenant("platform", "Platform Operations")
        try:
            self.catalog.get_principal("platform", "root")
        except NotFound:
            self.catalog.create_principal("platform", "root", kind="machine", admin=True)
        for raw_key, ref in self.config.api_keys.items():
            tenant, _, pid = ref.partition("/")
            try:
                self.catalog.get_principal(tenant, pid)
            except NotFound:
                try:
                    self.catalog.get_tenant(tenant)
                except NotFound:
                    continue  # tenant not provisioned yet; key stays inert
                self.catalog.create_principal(tenant, pid, kind="machine", admin=True)
            self.meta.put(APIKEY_PREFIX + _hash_key(raw_key), {"principal": ref})

    def issue_api_key(self, principal: Principal) -> str:
        raw = secrets.token_hex(16)
        self.meta.put(APIKEY_PREFIX + _hash_key(raw), {"principal": principal.ref()})
        return raw

    def authenticate(self, raw_key: str | None) -> Principal:
        if not raw_key:
            raise Unauthenticated("missing API key")
        rec = self.meta.get(APIKEY_PREFIX + _hash_key(raw_key))
        if rec is None:
            raise Unauthenticated("unknown API key")
        tenant, _, pid = rec.body["principal"].partition("/")
        return self.catalog.get_principal(tenant, pid)

    def is_platform_admin(self, principal: Principal) -> bool:
        return principal.admin and principal.tenant == "platform"

    # -- tenant / principal management -----------------------------------------------------

    def create_tenant(self, caller: Principal, tenant_id: str, display_name: str) -> dict:
        if not self.is_platform_admin(caller):
            raise AccessDenied("only platform admins create tenants")
        tenant = self.catalog.create_tenant(tenant_id, display_name)
        admin = self.catalog.create_principal(tenant.id, "admin", kind="human", admin=True)
        api_key = self.issue_api_key(admin)
        return {
            "tenant": {"id": tenant.id, "display_name": tenant.display_name, "created_at": tenant.created_at},
            "admin_principal": admin.ref(),
            "api_key": api_key,  # returned once, stored hashed
        }

    def create_principal(self, caller: Principal, tenant: str, principal_id: str,
                         kind: str = "human", admin: bool = False) -> dict:
        if not (self.is_platform_admin(caller) or (caller.admin and caller.tenant == tenant)):
            raise AccessDenied("only tenant admins create principals")
        principal = self.catalog.create_principal(tenant, principal_id, kind=kind, admin=admin)
        api_key = self.issue_api_key(principal)
        return {"principal": principal.ref(), "kind": kind, "admin": admin, "api_key": api_key}

    # -- sessions & queries -------------------------------------------------------------------

    def open_session(self, principal: Principal, warehouse: str = "default") -> Session:
        return self.gateway.open_session(principal, warehouse=warehouse)

    def execute_sql(self, principal: Principal, sql: str, warehouse: str = "default",
                    force: bool = False):
        session = self.open_session(principal, warehouse=warehouse)
        return self.gateway.execute(session, principal, sql, force=force)

    # -- transformer integration ----------------------------------------------------------------

    def infer_stream_schema(self, principal: Principal, qualified: str, sample: int = 1000):
        if not self.access.check_access(principal, qualified, "READ"):
            raise AccessDenied(f"{principal.ref()} lacks READ on {qualified}")
        table = self.tables.get(qualified)
        rows, _stats, _ms = table.sample_preview(sample)
        payload_idx = {c.name: i for i, c in enumerate(table.columns)}.get("payload")
        if payload_idx is None:
            raise UnknownObject(f"{qualified} has no payload column")
        docs = [r[payload_idx] for r in rows if isinstance(r[payload_idx], dict)]
        return infer_schema(docs, max_depth=self.config.infer_max_depth)

    def create_generated_views(self, principal: Principal, qualified: str, schema,
                               force: bool = False) -> list[dict]:
        """Register transformer view models; NameCollision unless force."""
        address, _rec = self.catalog.resolve(qualified)
        views = generate_view_models(schema, qualified, address.name)
        created = []
        for view in views:
            view_address = make_address(
                address.tenant, address.namespace, view["name"], ObjectKind.VIEW
            )
            existing = self.catalog.try_resolve(view_address.qualified())
            if existing is not None:
                if not force:
                    raise NameCollision(f"view exists: {view_address.qualified()}")
                self.catalog.drop_object(existing[0])
            if not self.access.check_access(principal, view_address.qualified(), "WRITE"):
                raise AccessDenied(f"{principal.ref()} lacks WRITE on {view_address.qualified()}")
            stmt = None
            try:
                from .sql import extract_dependencies, parse

                stmt = parse(view["sql"])
                deps = extract_dependencies(stmt, self.snapshot, address.tenant)
                columns = list(deps.planned.output_columns) if deps.planned else []
                derived = sorted(a for a in deps.reads if deps.kinds.get(a) != "share")
            except Exception:
                columns, derived = [], [qualified]
            self.catalog.register_object(
                view_address,
                {
                    "view_sql": view["sql"],
                    "columns": columns,
                    "derived_from": derived or [qualified],
                    "created_by": principal.ref(),
                    "description": view["description"],
                },
            )
            created.append({"address": view_address.qualified(), **view})
        return created

    # -- notifications ----------------------------------------------------------------------------

    def inbox_path(self, tenant: str) -> str:
        return os.path.join(self.config.data_dir, "inbox", f"{tenant}.jsonl")

    def notify(self, tenant: str, doc: dict) -> None:
        path = self.inbox_path(tenant)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with self._inbox_lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(dumps_compact({"at": now_rfc3339(), **doc}) + "\n")

    def read_inbox(self, tenant: str) -> list[dict]:
        import json

        path = self.inbox_path(tenant)
        if not os.path.exists(path):
            return []
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    # -- background jobs ----------------------------------------------------------------------------

    def _loop(self, interval_s: float, job, name: str) -> None:
        while not self._stop_background.wait(interval_s):
            try:
                job()
            except Exception as exc:  # noqa: BLE001 - background jobs must not die
                self.notify("platform", {"type": "job_error", "job": name, "error": str(exc)})

    def _sweep_stability(self) -> None:
        for address, _rec in self.catalog.list_objects(kind=ObjectKind.PRODUCT):
            self.marketplace.evaluate_stability(address.qualified())

    def _sweep_advisor(self) -> None:
        self.advisor.detect_failsafe_overuse()
        for address, rec in self.catalog.list_objects(kind=ObjectKind.TABLE):
            if self.tables.exists(address):
                self.advisor.recommend_clustering(address.qualified())

    def _sweep_pii(self) -> None:
        for address, _rec in self.catalog.list_objects(kind=ObjectKind.TABLE):
            if self.tables.exists(address):
                self.pii.scan_table(address.qualified())

    def _sweep_recycle(self) -> None:
        self.tables.purge_recycle()

    def start_background(self) -> None:
        """Schedule loader cycles and periodic sweeps (used by serve)."""
        if self._background_threads:
            return
        self._stop_background.clear()
        jobs = [
            (self.config.loader_interval_s, lambda: self.streams.run_all_loaders(), "loader"),
            (self.config.stability_sweep_interval_s, self._sweep_stability, "stability"),
            (self.config.advisor_sweep_interval_s, self._sweep_advisor, "advisor"),
            (self.config.pii_scan_interval_s, self._sweep_pii, "pii"),
            (3600.0, self._sweep_recycle, "recycle"),
        ]
        for interval, job, name in jobs:
            thread = threading.Thread(
                target=self._loop, args=(interval, job, name), daemon=True, name=f"mesh-{name}"
            )
            thread.start()
            self._background_threads.append(thread)

    def stop_background(self) -> None:
        self._stop_background.set()
        for thread in self._background_threads:
            thread.join(timeout=5)
        self._background_threads = []

    # -- lifecycle -----------------------------------------------------------------------------------

    def close(self) -> None:
        self.stop_background()
        self.gateway.close()
        self.meta.close()


def open_platform(config: PlatformConfig | None = None, **overrides) -> Platform:
    cfg = config or PlatformConfig()
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return Platform(cfg)
