"""Self-service event streams: HTTP-facing staging, micro-batch loading,
and derived dedup / latest-version views.

Durability contract: events are appended to the open staging file and
fsynced before the gateway acknowledges. Loading a staged file and
recording it in the table manifest commit together (one catalog rename),
so loader crashes and retries never duplicate rows: at-least-once staging,
exactly-once table effect.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone

from .core import Catalog, ObjectAddress, ObjectKind, make_address
from .errors import (
    DuplicateObject,
    DuplicateStream,
    KeyNotConfigured,
    MalformedPayload,
    MeshError,
    UnknownStream,
)
from .store import Column, TableStore
from .util import dumps_compact, now_rfc3339
from .variant import sort_key, validate_variant, variant_get

BASE_COLUMNS = [
    Column("_id", "STRING"),
    Column("_received_at", "STRING"),
    Column("_file", "STRING"),
    Column("payload", "VARIANT"),
]


def stream_key(tenant: str, namespace: str, name: str) -> str:
    return f"~sys/stream/{tenant}/{namespace}/{name}"


@dataclass
class StagedFile:
    relpath: str
    path: str
    state: str  # open | sealed | loaded
    event_count: int


class StreamManager:
    def __init__(
        self,
        staging_root: str,
        catalog: Catalog,
        table_store: TableStore,
        seal_bytes: int = 10 * 1024 * 1024,
        seal_age_s: float = 5.0,
        max_depth: int = 64,
    ):
        self.staging_root = staging_root
        self.catalog = catalog
        self.table_store = table_store
        self.seal_bytes = seal_bytes
        self.seal_age_s = seal_age_s
        self.max_depth = max_depth
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._counter = 0
        os.makedirs(staging_root, exist_ok=True)

    # -- helpers ---------------------------------------------------------------

    def _lock_for(self, qualified: str) -> threading.Lock:
        with self._guard:
            lock = self._locks.get(qualified)
            if lock is None:
                lock = self._locks[qualified] = threading.Lock()
            return lock

    def _next_counter(self) -> int:
        with self._guard:
            self._counter += 1
            return self._counter

    def _stream_dir(self, address: ObjectAddress) -> str:
        return os.path.join(self.staging_root, address.tenant, address.tenant_relative())

    # -- stream lifecycle ----------------------------------------------------------

    def create_stream(
        self,
        tenant: str,
        namespace: str,
        name: str,
        options: dict | None = None,
        created_by: str = "",
    ) -> dict:
        options = options or {}
        address = make_address(tenant, namespace, name, ObjectKind.TABLE)
        if self.catalog.store.get(stream_key(tenant, address.namespace, address.name)):
            raise DuplicateStream(f"stream exists: {address.qualified()}")
        dedup_key = list(options.get("dedup_key") or [])
        version_key = options.get("version_key")
        if version_key is not None and not (
            isinstance(version_key, (list, tuple)) and len(version_key) == 2
        ):
            raise MalformedPayload("version_key must be [entity_path, ordering_path]")
        cluster_key = options.get("cluster_key")
        tracked = [c.name for c in BASE_COLUMNS]
        for payload_path in dedup_key:
            tracked.append(f"payload.{payload_path}")
        if cluster_key:
            tracked.append(f"payload.{cluster_key}")
        try:
            self.catalog.register_object(
                address,
                {"stream": True, "created_by": created_by, "columns": _column_doc()},
            )
        except DuplicateObject:
            raise DuplicateStream(f"address in use: {address.qualified()}")
        self.table_store.create_table(
            address,
            BASE_COLUMNS,
            retention_enabled=bool(options.get("retention_enabled", True)),
            tracked_paths=sorted(set(tracked)),
        )
        definition = {
            "stream": address.qualified(),
            "base_table": address.qualified(),
            "namespace": address.namespace,
            "name": address.name,
            "dedup_key": dedup_key,
            "version_key": list(version_key) if version_key else None,
            "cluster_key": cluster_key,
            "created_by": created_by,
            "created_at": now_rfc3339(),
            "endpoint": f"/v1/streams/{tenant}/{address.namespace}/{address.name}/events",
        }
        self.catalog.store.put(stream_key(tenant, address.namespace, address.name), definition)
        if dedup_key:
            self._register_cdc_view(address, f"{address.name}__dedup", {
                "op": "dedup",
                "base": address.qualified(),
                "keys": [f"payload.{p}" for p in dedup_key],
                "order": ["_received_at", "_id"],
            })
        if version_key:
            entity, ordering = version_key
            self._register_cdc_view(address, f"{address.name}__latest", {
                "op": "latest",
                "base": address.qualified(),
                "keys": [f"payload.{entity}"],
                "order": [f"payload.{ordering}", "_received_at", "_id"],
            })
        return definition

    def _register_cdc_view(self, base: ObjectAddress, view_name: str, native: dict) -> None:
        view_address = make_address(base.tenant, base.namespace, view_name, ObjectKind.VIEW)
        self.catalog.register_object(view_address, {"native": native, "derived_from": [base.qualified()]})

    def get_stream(self, tenant: str, namespace: str, name: str) -> dict:
        rec = self.catalog.store.get(stream_key(tenant, namespace, name))
        if rec is None:
            raise UnknownStream(f"no such stream: {tenant}.{namespace}.{name}")
        return dict(rec.body)

    def list_streams(self, tenant: str | None = None) -> list[dict]:
        prefix = f"~sys/stream/{tenant}/" if tenant else "~sys/stream/"
        return [dict(rec.body) for rec in self.catalog.store.items(prefix)]

    def view_definition(self, tenant: str, namespace: str, name: str, kind: str) -> dict:
        """The logical dedup/latest view produced for a stream; KeyNotConfigured otherwise."""
        definition = self.get_stream(tenant, namespace, name)
        if kind == "dedup" and not definition.get("dedup_key"):
            raise KeyNotConfigured(f"stream {name} has no dedup_key")
        if kind == "latest" and not definition.get("version_key"):
            raise KeyNotConfigured(f"stream {name} has no version_key")
        suffix = "__dedup" if kind == "dedup" else "__latest"
        _addr, rec = self.catalog.resolve(f"{tenant}.{namespace}.{name}{suffix}")
        return dict(rec.body)

    # -- ingestion -------------------------------------------------------------------

    def post_events(
        self,
        tenant: str,
        namespace: str,
        name: str,
        payloads: list,
        client_event_id: str | None = None,
    ) -> int:
        """Append envelopes to the open staging file; durable before return."""
        self.get_stream(tenant, namespace, name)  # UnknownStream check
        address = make_address(tenant, namespace, name, ObjectKind.TABLE)
        for payload in payloads:
            if not isinstance(payload, dict):
                raise MalformedPayload("each event must be a JSON object")
            try:
                validate_variant(payload, self.max_depth)
            except MeshError as exc:
                raise MalformedPayload(f"payload rejected: {exc.message}")
        qualified = address.qualified()
        lines = []
        for i, payload in enumerate(payloads):
            payload_text = dumps_compact(payload)
            if client_event_id is not None and len(payloads) == 1:
                event_id = client_event_id
            else:
                seed = f"{payload_text}|{time.time_ns()}|{self._next_counter()}"
                event_id = hashlib.sha256(seed.encode("utf-8")).hexdigest()[:32]
            envelope = {
                "event_id": event_id,
                "received_at": now_rfc3339(),
                "stream": qualified,
                "payload": payload,
            }
            lines.append(dumps_compact(envelope))
        with self._lock_for(qualified):
            path = self._open_file_path(address, create=True)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
                fh.flush()
                if self.table_store.fsync:
                    os.fsync(fh.fileno())
        return len(payloads)

    def _open_file_path(self, address: ObjectAddress, create: bool) -> str | None:
        stream_dir = self._stream_dir(address)
        today = datetime.now(timezone.utc)
        day_dir = os.path.join(stream_dir, f"{today.year:04d}", f"{today.month:02d}", f"{today.day:02d}")
        existing = self._find_open_file(stream_dir)
        if existing is not None:
            # roll when past thresholds
            if self._past_thresholds(existing):
                self._seal(existing)
            else:
                return existing
        if not create:
            return None
        os.makedirs(day_dir, exist_ok=True)
        seq = 1 + sum(1 for f in os.listdir(day_dir) if f.endswith(".jsonl") or f.endswith(".jsonl.open"))
        return os.path.join(day_dir, f"{seq:06d}.jsonl.open")

    def _find_open_file(self, stream_dir: str) -> str | None:
        if not os.path.isdir(stream_dir):
            return None
        for dirpath, _dirs, files in os.walk(stream_dir):
            for filename in files:
                if filename.endswith(".jsonl.open"):
                    return os.path.join(dirpath, filename)
        return None

    def _past_thresholds(self, path: str) -> bool:
        try:
            stat = os.stat(path)
        except OSError:
            return False
        age = time.time() - stat.st_mtime
        return stat.st_size >= self.seal_bytes or age >= self.seal_age_s

    def _seal(self, open_path: str) -> str:
        sealed = open_path[: -len(".open")]
        os.replace(open_path, sealed)
        return sealed

    # -- loading ------------------------------------------------------------------------

    def staged_files(self, tenant: str, namespace: str, name: str) -> list[StagedFile]:
        address = make_address(tenant, namespace, name, ObjectKind.TABLE)
        stream_dir = self._stream_dir(address)
        table = self.table_store.get(address)
        loaded = set(table.loaded_files)
        out: list[StagedFile] = []
        if not os.path.isdir(stream_dir):
            return out
        for dirpath, _dirs, files in os.walk(stream_dir):
            for filename in sorted(files):
                path = os.path.join(dirpath, filename)
                rel = os.path.relpath(path, self.staging_root)
                if filename.endswith(".jsonl.open"):
                    state = "open"
                elif filename.endswith(".jsonl"):
                    state = "loaded" if rel in loaded else "sealed"
                else:
                    continue
                count = sum(1 for _ in open(path, encoding="utf-8"))
                out.append(StagedFile(relpath=rel, path=path, state=state, event_count=count))
        out.sort(key=lambda f: f.relpath)
        return out

    def run_loader_cycle(self, tenant: str, namespace: str, name: str, force_seal: bool = False) -> int:
        """Seal due files and load every sealed-unloaded file exactly once."""
        definition = self.get_stream(tenant, namespace, name)
        address = make_address(tenant, namespace, name, ObjectKind.TABLE)
        table = self.table_store.get(address)
        qualified = address.qualified()
        loaded_rows = 0
        with self._lock_for(qualified):
            stream_dir = self._stream_dir(address)
            open_path = self._find_open_file(stream_dir)
            if open_path is not None and (force_seal or self._past_thresholds(open_path)):
                if os.path.getsize(open_path) > 0:
                    self._seal(open_path)
            pending: list[tuple[str, str]] = []
            loaded = set(table.loaded_files)
            if os.path.isdir(stream_dir):
                for dirpath, _dirs, files in os.walk(stream_dir):
                    for filename in files:
                        if not filename.endswith(".jsonl"):
                            continue
                        path = os.path.join(dirpath, filename)
                        rel = os.path.relpath(path, self.staging_root)
                        if rel not in loaded:
                            pending.append((rel, path))
            pending.sort()
            cluster_key = definition.get("cluster_key")
            for rel, path in pending:
                rows = []
                with open(path, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        envelope = json.loads(line)
                        rows.append(
                            (
                                envelope["event_id"],
                                envelope["received_at"],
                                rel,
                                envelope["payload"],
                            )
                        )
                if cluster_key:
                    rows.sort(key=lambda r: (
                        variant_get(r[3], cluster_key) is None,
                        sort_key(variant_get(r[3], cluster_key)),
                    ))
                # block files + manifest entry commit atomically here
                table.append_rows(rows, manifest_adds=[rel])
                loaded_rows += len(rows)
        return loaded_rows

    def run_all_loaders(self, force_seal: bool = False) -> int:
        total = 0
        for definition in self.list_streams():
            parts = definition["stream"].split(".")
            tenant = parts[0]
            namespace = ".".join(parts[1:-1])
            total += self.run_loader_cycle(tenant, namespace, parts[-1], force_seal=force_seal)
        return total


def _column_doc() -> list[dict]:
    return [{"name": c.name, "type": c.type} for c in BASE_COLUMNS]
