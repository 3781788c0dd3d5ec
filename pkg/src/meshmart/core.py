"""Tenancy, naming, addressing, and the versioned metadata store.

The metadata store is one append-only JSONL journal plus a compacted
snapshot directory per platform instance. Writes are serialized by a
store-wide lock (the sequencer); reads are consistent snapshots of the
in-memory state. Authorization is the caller's job: the API facade checks
MANAGE before routing external writes here.
"""

from __future__ import annotations

import io
import json
import os
import re
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import (
    CorruptJournal,
    DuplicateObject,
    DuplicateTenant,
    InvalidIdentifier,
    MalformedAddress,
    NotFound,
)
from .util import atomic_write_text, dumps_compact, fsync_dir, now_rfc3339

TENANT_RE = re.compile(r"^[a-z][a-z0-9_]{1,31}$")
TOKEN_RE = re.compile(r"^[a-z][a-z0-9_]{0,62}$")

SYS_PREFIX = "~sys/"


class ObjectKind(str, Enum):
    TABLE = "table"
    VIEW = "view"
    STREAM = "stream"
    SHARE = "share"
    PRODUCT = "product"


def fold_identifier(text: str) -> str:
    """Identifiers are case-folded to lowercase at the platform boundary."""
    return text.strip().lower()


def check_tenant_id(tenant_id: str) -> str:
    tenant_id = fold_identifier(tenant_id)
    if not TENANT_RE.match(tenant_id):
        raise InvalidIdentifier(f"bad tenant id: {tenant_id!r}")
    return tenant_id


def check_token(token: str, what: str = "identifier") -> str:
    token = fold_identifier(token)
    if not TOKEN_RE.match(token):
        raise InvalidIdentifier(f"bad {what}: {token!r}")
    return token


def check_namespace(namespace: str) -> str:
    """Namespaces are 1 or 2 dotted lowercase tokens (database[.schema] analog)."""
    namespace = fold_identifier(namespace)
    parts = namespace.split(".")
    if len(parts) not in (1, 2):
        raise MalformedAddress(f"namespace must have 1 or 2 segments: {namespace!r}")
    for part in parts:
        check_token(part, "namespace segment")
    return namespace


@dataclass(frozen=True)
class ObjectAddress:
    """Fully qualified object identity: tenant.namespace.name, unique platform-wide."""

    tenant: str
    namespace: str
    name: str
    kind: ObjectKind

    def qualified(self) -> str:
        return f"{self.tenant}.{self.namespace}.{self.name}"

    def tenant_relative(self) -> str:
        return f"{self.namespace}.{self.name}"

    def __str__(self) -> str:
        return self.qualified()


def make_address(tenant: str, namespace: str, name: str, kind: ObjectKind) -> ObjectAddress:
    return ObjectAddress(
        tenant=check_tenant_id(tenant),
        namespace=check_namespace(namespace),
        name=check_token(name, "object name"),
        kind=kind,
    )


def parse_qualified(text: str, kind: ObjectKind | None = None) -> ObjectAddress:
    """Parse `tenant.ns.name` or `tenant.db.schema.name` into an address.

    The kind is not encoded in the string; pass one when known, else the
    placeholder TABLE kind is used and callers should take the kind from
    the resolved metadata record.
    """
    text = fold_identifier(text)
    parts = text.split(".")
    if len(parts) == 3:
        tenant, namespace, name = parts[0], parts[1], parts[2]
    elif len(parts) == 4:
        tenant, namespace, name = parts[0], f"{parts[1]}.{parts[2]}", parts[3]
    else:
        raise MalformedAddress(f"address must have 3 or 4 segments: {text!r} ({len(parts)} segments)")
    return make_address(tenant, namespace, name, kind or ObjectKind.TABLE)


@dataclass(frozen=True)
class Tenant:
    id: str
    display_name: str
    created_at: str


@dataclass(frozen=True)
class Principal:
    id: str
    tenant: str
    kind: str  # human | machine
    admin: bool = False

    def ref(self) -> str:
        return f"{self.tenant}/{self.id}"


@dataclass
class MetadataRecord:
    key: str
    version: int
    body: dict | None
    updated_at: str

    def to_dict(self) -> dict:
        return {"key": self.key, "version": self.version, "body": self.body, "updated_at": self.updated_at}


class MetadataStore:
    """Append-only journal + compacted snapshot, recovered on open.

    Journal lines are `{key, version, body, updated_at}`. A deletion is a
    line with body null. Snapshot files mirror tenant/namespace as a
    directory tree, one JSON document per key.
    """

    JOURNAL = "journal.jsonl"
    SNAPSHOT_DIR = "snapshot"

    def __init__(self, root: str, fsync: bool = True):
        self.root = root
        self.fsync = fsync
        self._lock = threading.RLock()
        self._records: dict[str, MetadataRecord] = {}
        self._journal_fh: io.TextIOWrapper | None = None
        os.makedirs(root, exist_ok=True)
        self._recover()
        self._journal_fh = open(self._journal_path(), "a", encoding="utf-8")

    # -- paths -------------------------------------------------------------

    def _journal_path(self) -> str:
        return os.path.join(self.root, self.JOURNAL)

    def _snapshot_root(self) -> str:
        return os.path.join(self.root, self.SNAPSHOT_DIR)

    def _snapshot_path(self, key: str) -> str:
        if key.startswith(SYS_PREFIX):
            rel = os.path.join("_sys", *key[len(SYS_PREFIX):].split("/"))
        else:
            rel = os.path.join(*key.split("."))
        return os.path.join(self._snapshot_root(), rel + ".json")

    # -- recovery -------------------------------------------------------------

    def _recover(self) -> None:
        snap_root = self._snapshot_root()
        if os.path.isdir(snap_root):
            for dirpath, _dirnames, filenames in os.walk(snap_root):
                for filename in filenames:
                    if not filename.endswith(".json"):
                        continue
                    with open(os.path.join(dirpath, filename), encoding="utf-8") as fh:
                        doc = json.load(fh)
                    rec = MetadataRecord(doc["key"], doc["version"], doc["body"], doc["updated_at"])
                    self._records[rec.key] = rec
        journal = self._journal_path()
        if not os.path.exists(journal):
            return
        with open(journal, "rb") as fh:
            raw = fh.read()
        good_bytes = 0
        line_no = 0
        pos = 0
        while pos < len(raw):
            newline_at = raw.find(b"\n", pos)
            terminated = newline_at != -1
            line = raw[pos:newline_at] if terminated else raw[pos:]
            line_no += 1
            try:
                doc = json.loads(line.decode("utf-8"))
                if not isinstance(doc, dict) or "key" not in doc or "version" not in doc:
                    raise ValueError("missing fields")
            except (ValueError, UnicodeDecodeError) as exc:
                if not terminated:
                    # Torn final write: never acknowledged, safe to drop.
                    break
                raise CorruptJournal(
                    f"journal line {line_no} unreadable ({exc}); "
                    f"restore from snapshot or truncate {journal} to byte {good_bytes}"
                )
            if not terminated:
                # Complete JSON but the ack newline never hit disk: treat as torn.
                break
            rec = MetadataRecord(doc["key"], doc["version"], doc.get("body"), doc.get("updated_at", ""))
            current = self._records.get(rec.key)
            if current is None or rec.version > current.version:
                self._records[rec.key] = rec
            pos = newline_at + 1
            good_bytes = pos
        if good_bytes < len(raw):
            with open(journal, "r+b") as fh:
                fh.truncate(good_bytes)

    # -- primitive ops ----------------------------------------------------------

    def get(self, key: str) -> MetadataRecord | None:
        with self._lock:
            rec = self._records.get(key)
            if rec is None or rec.body is None:
                return None
            return MetadataRecord(rec.key, rec.version, rec.body, rec.updated_at)

    def get_version(self, key: str) -> int:
        with self._lock:
            rec = self._records.get(key)
            return rec.version if rec else 0

    def put(self, key: str, body: dict | None) -> int:
        """Write a new version of key. Durable before return. Returns the version."""
        with self._lock:
            prev = self._records.get(key)
            version = (prev.version if prev else 0) + 1
            rec = MetadataRecord(key, version, body, now_rfc3339())
            line = dumps_compact(rec.to_dict())
            fh = self._journal_fh
            fh.write(line + "\n")
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())
            self._records[key] = rec
            return version

    def delete(self, key: str) -> int:
        return self.put(key, None)

    def keys(self, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(k for k, rec in self._records.items() if rec.body is not None and k.startswith(prefix))

    def items(self, prefix: str = "") -> list[MetadataRecord]:
        with self._lock:
            return [
                MetadataRecord(r.key, r.version, r.body, r.updated_at)
                for k, r in sorted(self._records.items())
                if r.body is not None and k.startswith(prefix)
            ]

    def compact(self) -> None:
        """Materialize the snapshot tree and truncate the journal."""
        with self._lock:
            tmp_root = self._snapshot_root() + ".tmp"
            if os.path.isdir(tmp_root):
                _rmtree(tmp_root)
            os.makedirs(tmp_root, exist_ok=True)
            for key, rec in self._records.items():
                path = self._snapshot_path(key).replace(self._snapshot_root(), tmp_root, 1)
                os.makedirs(os.path.dirname(path), exist_ok=True)
                atomic_write_text(path, json.dumps(rec.to_dict()), fsync=self.fsync)
            final_root = self._snapshot_root()
            if os.path.isdir(final_root):
                _rmtree(final_root)
            os.replace(tmp_root, final_root)
            fsync_dir(self.root)
            self._journal_fh.close()
            self._journal_fh = open(self._journal_path(), "w", encoding="utf-8")
            if self.fsync:
                self._journal_fh.flush()
                os.fsync(self._journal_fh.fileno())

    def close(self) -> None:
        with self._lock:
            if self._journal_fh is not None:
                self.compact()
                self._journal_fh.close()
                self._journal_fh = None


def _rmtree(path: str) -> None:
    for dirpath, dirnames, filenames in os.walk(path, topdown=False):
        for filename in filenames:
            os.unlink(os.path.join(dirpath, filename))
        for dirname in dirnames:
            os.rmdir(os.path.join(dirpath, dirname))
    os.rmdir(path)


def tenant_key(tenant_id: str) -> str:
    return f"{SYS_PREFIX}tenant/{tenant_id}"


def principal_key(tenant_id: str, principal_id: str) -> str:
    return f"{SYS_PREFIX}principal/{tenant_id}/{principal_id}"


class Catalog:
    """Object registry over the metadata store: tenants, principals, addresses."""

    def __init__(self, store: MetadataStore):
        self.store = store
        self._lock = threading.RLock()

    # -- tenants ------------------------------------------------------------

    def create_tenant(self, tenant_id: str, display_name: str) -> Tenant:
        tenant_id = check_tenant_id(tenant_id)
        with self._lock:
            if self.store.get(tenant_key(tenant_id)) is not None:
                raise DuplicateTenant(f"tenant exists: {tenant_id}")
            tenant = Tenant(id=tenant_id, display_name=display_name, created_at=now_rfc3339())
            self.store.put(tenant_key(tenant_id), {"id": tenant.id, "display_name": tenant.display_name, "created_at": tenant.created_at})
            return tenant

    def get_tenant(self, tenant_id: str) -> Tenant:
        rec = self.store.get(tenant_key(fold_identifier(tenant_id)))
        if rec is None:
            raise NotFound(f"no such tenant: {tenant_id}")
        body = rec.body
        return Tenant(id=body["id"], display_name=body["display_name"], created_at=body["created_at"])

    def list_tenants(self) -> list[Tenant]:
        out = []
        for rec in self.store.items(f"{SYS_PREFIX}tenant/"):
            body = rec.body
            out.append(Tenant(id=body["id"], display_name=body["display_name"], created_at=body["created_at"]))
        return out

    # -- principals -----------------------------------------------------------

    def create_principal(self, tenant_id: str, principal_id: str, kind: str = "human", admin: bool = False) -> Principal:
        tenant_id = check_tenant_id(tenant_id)
        principal_id = check_token(principal_id, "principal id")
        if kind not in ("human", "machine"):
            raise InvalidIdentifier(f"principal kind must be human or machine: {kind!r}")
        self.get_tenant(tenant_id)
        with self._lock:
            key = principal_key(tenant_id, principal_id)
            if self.store.get(key) is not None:
                raise DuplicateObject(f"principal exists: {tenant_id}/{principal_id}")
            principal = Principal(id=principal_id, tenant=tenant_id, kind=kind, admin=admin)
            self.store.put(key, {"id": principal_id, "tenant": tenant_id, "kind": kind, "admin": admin})
            return principal

    def get_principal(self, tenant_id: str, principal_id: str) -> Principal:
        rec = self.store.get(principal_key(fold_identifier(tenant_id), fold_identifier(principal_id)))
        if rec is None:
            raise NotFound(f"no such principal: {tenant_id}/{principal_id}")
        body = rec.body
        return Principal(id=body["id"], tenant=body["tenant"], kind=body["kind"], admin=body.get("admin", False))

    # -- objects ----------------------------------------------------------------

    def register_object(self, address: ObjectAddress, body: dict) -> MetadataRecord:
        """Create a live object at an unused qualified address."""
        self.get_tenant(address.tenant)
        with self._lock:
            key = address.qualified()
            if self.store.get(key) is not None:
                raise DuplicateObject(f"address in use: {key}")
            doc = dict(body)
            doc["kind"] = address.kind.value
            doc["address"] = {"tenant": address.tenant, "namespace": address.namespace, "name": address.name}
            version = self.store.put(key, doc)
            return MetadataRecord(key, version, doc, now_rfc3339())

    def update_object(self, address: ObjectAddress, mutate: Callable[[dict], dict]) -> MetadataRecord:
        with self._lock:
            key = address.qualified()
            rec = self.store.get(key)
            if rec is None:
                raise NotFound(f"no such object: {key}")
            doc = mutate(dict(rec.body))
            version = self.store.put(key, doc)
            return MetadataRecord(key, version, doc, now_rfc3339())

    def resolve(self, qualified: str) -> tuple[ObjectAddress, MetadataRecord]:
        """Resolve a qualified address string to its single live object."""
        address = parse_qualified(qualified)
        rec = self.store.get(address.qualified())
        if rec is None:
            raise NotFound(f"no such object: {qualified}")
        kind = ObjectKind(rec.body["kind"])
        resolved = ObjectAddress(address.tenant, address.namespace, address.name, kind)
        return resolved, rec

    def try_resolve(self, qualified: str) -> tuple[ObjectAddress, MetadataRecord] | None:
        try:
            return self.resolve(qualified)
        except (NotFound, MalformedAddress):
            return None

    def drop_object(self, address: ObjectAddress) -> None:
        with self._lock:
            key = address.qualified()
            if self.store.get(key) is None:
                raise NotFound(f"no such object: {key}")
            self.store.delete(key)

    def list_objects(self, tenant: str | None = None, kind: ObjectKind | None = None) -> list[tuple[ObjectAddress, MetadataRecord]]:
        out = []
        for rec in self.store.items(""):
            if rec.key.startswith(SYS_PREFIX) or "kind" not in (rec.body or {}):
                continue
            body = rec.body
            addr_doc = body.get("address")
            if not addr_doc:
                continue
            address = ObjectAddress(addr_doc["tenant"], addr_doc["namespace"], addr_doc["name"], ObjectKind(body["kind"]))
            if tenant is not None and address.tenant != tenant:
                continue
            if kind is not None and address.kind != kind:
                continue
            out.append((address, rec))
        out.sort(key=lambda pair: pair[0].qualified())
        return out
