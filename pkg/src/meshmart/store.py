"""Columnar storage for semi-structured rows: blocks, zone maps, pruning.

A table is a list of sealed immutable blocks plus one open block. Zone maps
(min/max/null-count per tracked path) are exact; pruning may only skip a
block when the zone map proves no row can satisfy a predicate term. The
on-disk commit unit is the table catalog file, renamed atomically, so a
batch of new blocks plus any manifest update become visible together or
not at all.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone

from .core import ObjectAddress
from .errors import DuplicateObject, NoSuchTable, StorageFailure, TypeMismatch, UnknownPath
from .util import atomic_write_text, dumps_compact, now_rfc3339

_STAMP_FMT = "%Y%m%dT%H%M%S%f"


def _fs_stamp(dt: datetime | None = None) -> str:
    return (dt or datetime.now(timezone.utc)).strftime(_STAMP_FMT)
from .variant import Variant, sort_key, type_class, validate_variant, variant_compare, variant_get

BLOCK_MAGIC = "MESHBLK1"
TABLE_MAGIC = "MESHTBL1"
FORMAT_VERSION = 1

COMPARISON_OPS = ("=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Column:
    name: str
    type: str  # BOOL | INT | FLOAT | STRING | VARIANT


@dataclass(frozen=True)
class PredicateTerm:
    path: str
    op: str  # one of COMPARISON_OPS or "is_null"
    value: Variant = None


@dataclass
class ScanStats:
    partitions_total: int = 0
    partitions_scanned: int = 0
    rows_scanned: int = 0
    bytes_scanned: int = 0

    def to_dict(self) -> dict:
        return {
            "partitions_total": self.partitions_total,
            "partitions_scanned": self.partitions_scanned,
            "rows_scanned": self.rows_scanned,
            "bytes_scanned": self.bytes_scanned,
        }


class ZoneMap:
    """Exact min/max/null stats for one tracked path within one block."""

    __slots__ = ("kind", "lo", "hi", "nulls")

    def __init__(self, kind: str = "empty", lo=None, hi=None, nulls: int = 0):
        self.kind = kind  # empty | num | str | bool | mixed
        self.lo = lo
        self.hi = hi
        self.nulls = nulls

    def observe(self, value: Variant) -> None:
        if value is None:
            self.nulls += 1
            return
        cls = type_class(value)
        if cls in ("list", "dict"):
            self.kind = "mixed"
            self.lo = self.hi = None
            return
        if self.kind == "empty":
            self.kind = cls
            self.lo = self.hi = value
            return
        if self.kind == "mixed":
            return
        if self.kind != cls:
            self.kind = "mixed"
            self.lo = self.hi = None
            return
        if value < self.lo:
            self.lo = value
        if value > self.hi:
            self.hi = value

    def may_match(self, op: str, value: Variant) -> bool:
        """False only when provably no row in the block satisfies the term."""
        if op == "is_null":
            return self.nulls > 0
        if value is None:
            return False
        if self.kind == "empty":
            return False
        if self.kind == "mixed":
            return True
        if type_class(value) != self.kind:
            return False
        if op == "=":
            return self.lo <= value <= self.hi
        if op == "<":
            return self.lo < value
        if op == ">":
            return self.hi > value
        if op == "<=":
            return self.lo <= value
        if op == ">=":
            return self.hi >= value
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "nulls": self.nulls}

    @classmethod
    def from_dict(cls, doc: dict) -> "ZoneMap":
        return cls(doc["kind"], doc.get("lo"), doc.get("hi"), doc.get("nulls", 0))


@dataclass
class Block:
    id: int
    rows: list[tuple]
    zone_maps: dict[str, ZoneMap]
    sealed: bool = False
    bytes: int = 0


def _path_column(path: str) -> tuple[str, str | None]:
    if "." in path:
        head, rest = path.split(".", 1)
        return head, rest
    return path, None


class Table:
    """One table's physical state. Writers serialize on the table lock."""

    def __init__(self, store: "TableStore", address: ObjectAddress, directory: str):
        self.store = store
        self.address = address
        self.dir = directory
        self.columns: list[Column] = []
        self.cluster_key: str | None = None
        self.retention_enabled: bool = True
        self.tracked_paths: list[str] = []
        self.loaded_files: list[str] = []
        self.created_at: str = now_rfc3339()
        self.blocks: list[Block] = []
        self._open: Block | None = None
        self._next_block_id = 1
        self._lock = threading.RLock()
        self._col_index: dict[str, int] = {}

    # -- schema ------------------------------------------------------------

    def _reindex(self) -> None:
        self._col_index = {col.name: i for i, col in enumerate(self.columns)}

    @property
    def row_count(self) -> int:
        with self._lock:
            total = sum(b.rows.__len__() for b in self.blocks)
            if self._open is not None:
                total += len(self._open.rows)
            return total

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def describe(self) -> dict:
        with self._lock:
            return {
                "address": self.address.qualified(),
                "columns": [{"name": c.name, "type": c.type} for c in self.columns],
                "cluster_key": self.cluster_key,
                "retention_enabled": self.retention_enabled,
                "tracked_paths": list(self.tracked_paths),
                "row_count": self.row_count,
                "blocks": len(self.blocks) + (1 if self._open and self._open.rows else 0),
                "created_at": self.created_at,
            }

    # -- value access ------------------------------------------------------

    def path_value(self, row: tuple, path: str):
        head, rest = _path_column(path)
        idx = self._col_index.get(head)
        if idx is None:
            return None
        value = row[idx]
        if rest is None:
            return value
        return variant_get(value, rest)

    def track_path(self, path: str) -> None:
        """Register a payload path for zone-map tracking; back-fills existing blocks."""
        with self._lock:
            if path in self.tracked_paths:
                return
            head, _ = _path_column(path)
            if head not in self._col_index:
                raise UnknownPath(f"path head is not a column: {path}")
            self.tracked_paths.append(path)
            for block in self.blocks + ([self._open] if self._open else []):
                zm = ZoneMap()
                for row in block.rows:
                    zm.observe(self.path_value(row, path))
                block.zone_maps[path] = zm
            for block in self.blocks:
                if block.sealed:
                    self._write_block_file(block)
            self._commit_catalog()

    # -- append -------------------------------------------------------------

    def _validate_row(self, row: tuple) -> tuple:
        if len(row) != len(self.columns):
            raise TypeMismatch(
                f"row arity {len(row)} != {len(self.columns)} for {self.address.qualified()}"
            )
        for col, value in zip(self.columns, row):
            if value is None:
                continue
            if col.type == "INT" and not (isinstance(value, int) and not isinstance(value, bool)):
                raise TypeMismatch(f"column {col.name} expects INT")
            if col.type == "FLOAT" and not (isinstance(value, (int, float)) and not isinstance(value, bool)):
                raise TypeMismatch(f"column {col.name} expects FLOAT")
            if col.type == "BOOL" and not isinstance(value, bool):
                raise TypeMismatch(f"column {col.name} expects BOOL")
            if col.type == "STRING" and not isinstance(value, str):
                raise TypeMismatch(f"column {col.name} expects STRING")
            validate_variant(value, self.store.max_depth)
        return tuple(row)

    def _new_open_block(self) -> Block:
        block = Block(
            id=self._next_block_id,
            rows=[],
            zone_maps={p: ZoneMap() for p in self.tracked_paths},
            sealed=False,
        )
        self._next_block_id += 1
        return block

    def append_rows(self, rows: list[tuple], manifest_adds: list[str] | None = None) -> int:
        """Append rows; seal full blocks; commit atomically with manifest_adds.

        The commit point is the catalog rename: new block files written
        before it are invisible until the catalog references them, which is
        what makes loader retries exactly-once.
        """
        with self._lock:
            checked = [self._validate_row(r) for r in rows]
            if self._open is None:
                self._open = self._new_open_block()
            block_limit = self.store.block_size
            for row in checked:
                open_block = self._open
                open_block.rows.append(row)
                open_block.bytes += len(dumps_compact(list(row))) + 1
                for path, zm in open_block.zone_maps.items():
                    zm.observe(self.path_value(row, path))
                if len(open_block.rows) >= block_limit:
                    self._seal_open()
            if manifest_adds:
                self.loaded_files.extend(manifest_adds)
            self._flush_open()
            self._commit_catalog()
            return len(checked)

    def _seal_open(self) -> None:
        block = self._open
        block.sealed = True
        self._write_block_file(block)
        self.blocks.append(block)
        self._open = self._new_open_block()

    # -- persistence ------------------------------------------------------------

    def _block_path(self, block_id: int) -> str:
        return os.path.join(self.dir, "blocks", f"b_{block_id:08d}.jsonl")

    def _write_block_file(self, block: Block) -> None:
        header = {
            "magic": BLOCK_MAGIC,
            "format_version": FORMAT_VERSION,
            "block_id": block.id,
            "rows": len(block.rows),
            "sealed": block.sealed,
            "zone_maps": {p: zm.to_dict() for p, zm in block.zone_maps.items()},
        }
        lines = [dumps_compact(header)]
        lines.extend(dumps_compact(list(row)) for row in block.rows)
        text = "\n".join(lines) + "\n"
        os.makedirs(os.path.dirname(self._block_path(block.id)), exist_ok=True)
        atomic_write_text(self._block_path(block.id), text, fsync=self.store.fsync)
        block.bytes = len(text.encode("utf-8"))

    def _flush_open(self) -> None:
        if self._open is not None and self._open.rows:
            self._write_block_file(self._open)

    def _catalog_doc(self) -> dict:
        block_list = [
            {"id": b.id, "rows": len(b.rows), "bytes": b.bytes, "sealed": b.sealed}
            for b in self.blocks
        ]
        if self._open is not None and self._open.rows:
            b = self._open
            block_list.append({"id": b.id, "rows": len(b.rows), "bytes": b.bytes, "sealed": False})
        return {
            "magic": TABLE_MAGIC,
            "format_version": FORMAT_VERSION,
            "address": {
                "tenant": self.address.tenant,
                "namespace": self.address.namespace,
                "name": self.address.name,
            },
            "columns": [{"name": c.name, "type": c.type} for c in self.columns],
            "cluster_key": self.cluster_key,
            "retention_enabled": self.retention_enabled,
            "tracked_paths": self.tracked_paths,
            "loaded_files": self.loaded_files,
            "blocks": block_list,
            "next_block_id": self._next_block_id,
            "created_at": self.created_at,
        }

    def _commit_catalog(self) -> None:
        atomic_write_text(
            os.path.join(self.dir, "catalog.json"),
            json.dumps(self._catalog_doc(), indent=1),
            fsync=self.store.fsync,
        )

    def _load_from_disk(self) -> None:
        catalog_path = os.path.join(self.dir, "catalog.json")
        try:
            with open(catalog_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"unreadable table catalog {catalog_path}: {exc}")
        if doc.get("magic") != TABLE_MAGIC:
            raise StorageFailure(f"bad table catalog magic in {catalog_path}")
        self.columns = [Column(c["name"], c["type"]) for c in doc["columns"]]
        self._reindex()
        self.cluster_key = doc.get("cluster_key")
        self.retention_enabled = doc.get("retention_enabled", True)
        self.tracked_paths = list(doc.get("tracked_paths", []))
        self.loaded_files = list(doc.get("loaded_files", []))
        self._next_block_id = doc.get("next_block_id", 1)
        self.created_at = doc.get("created_at", now_rfc3339())
        self.blocks = []
        self._open = None
        for entry in doc.get("blocks", []):
            block = self._read_block_file(entry["id"])
            if entry.get("sealed"):
                block.sealed = True
                self.blocks.append(block)
            else:
                block.sealed = False
                self._open = block

    def _read_block_file(self, block_id: int) -> Block:
        path = self._block_path(block_id)
        with open(path, "rb") as fh:
            raw = fh.read()
        lines = raw.decode("utf-8").splitlines()
        header = json.loads(lines[0])
        if header.get("magic") != BLOCK_MAGIC:
            raise StorageFailure(f"bad block magic in {path}")
        rows = [tuple(json.loads(line)) for line in lines[1 : header["rows"] + 1]]
        zone_maps = {p: ZoneMap.from_dict(d) for p, d in header["zone_maps"].items()}
        block = Block(id=block_id, rows=rows, zone_maps=zone_maps, bytes=len(raw))
        return block

    # -- scan ----------------------------------------------------------------------

    def _snapshot_blocks(self) -> list[Block]:
        with self._lock:
            blocks = list(self.blocks)
            if self._open is not None and self._open.rows:
                open_copy = Block(
                    id=self._open.id,
                    rows=list(self._open.rows),
                    zone_maps=self._open.zone_maps,
                    sealed=False,
                    bytes=self._open.bytes,
                )
                blocks.append(open_copy)
            return blocks

    def scan(
        self,
        predicate: list[PredicateTerm] | None = None,
        projection: list[str] | None = None,
    ) -> tuple[list[tuple], ScanStats]:
        """Zone-map-pruned scan; result equals a full scan filtered by predicate."""
        predicate = predicate or []
        for term in predicate:
            if term.op not in COMPARISON_OPS and term.op != "is_null":
                raise UnknownPath(f"unsupported predicate op: {term.op}")
        if projection is not None:
            missing = [c for c in projection if c not in self._col_index]
            if missing:
                raise UnknownPath(f"undeclared columns in projection: {missing}")
            proj_idx = [self._col_index[c] for c in projection]
        else:
            proj_idx = None

        blocks = self._snapshot_blocks()
        stats = ScanStats(partitions_total=len(blocks))
        prunable = [t for t in predicate if t.path in self.tracked_paths]
        out: list[tuple] = []
        for block in blocks:
            skip = False
            for term in prunable:
                zm = block.zone_maps.get(term.path)
                if zm is not None and not zm.may_match(term.op, term.value):
                    skip = True
                    break
            if skip:
                continue
            stats.partitions_scanned += 1
            stats.rows_scanned += len(block.rows)
            stats.bytes_scanned += block.bytes
            for row in block.rows:
                if all(self._eval_term(row, t) for t in predicate):
                    out.append(row if proj_idx is None else tuple(row[i] for i in proj_idx))
        return out, stats

    def _eval_term(self, row: tuple, term: PredicateTerm) -> bool:
        value = self.path_value(row, term.path)
        if term.op == "is_null":
            return value is None
        cmp = variant_compare(value, term.value)
        if cmp is None:
            return False
        if term.op == "=":
            return cmp == 0
        if term.op == "<":
            return cmp < 0
        if term.op == ">":
            return cmp > 0
        if term.op == "<=":
            return cmp <= 0
        return cmp >= 0

    def sample_preview(self, n: int) -> tuple[list[tuple], ScanStats, float]:
        """First n rows without a full scan; elapsed milliseconds reported."""
        started = time.perf_counter()
        blocks = self._snapshot_blocks()
        stats = ScanStats(partitions_total=len(blocks))
        out: list[tuple] = []
        for block in blocks:
            if len(out) >= n:
                break
            stats.partitions_scanned += 1
            stats.rows_scanned += len(block.rows)
            stats.bytes_scanned += block.bytes
            out.extend(block.rows[: n - len(out)])
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return out, stats, elapsed_ms

    def all_rows(self) -> list[tuple]:
        return [row for block in self._snapshot_blocks() for row in block.rows]

    # -- recluster ----------------------------------------------------------------

    def recluster(self, key_path: str) -> dict:
        """Globally sort rows by key_path and rebuild the block layout."""
        with self._lock:
            head, _ = _path_column(key_path)
            if head not in self._col_index:
                raise UnknownPath(f"cluster key head is not a column: {key_path}")
            if key_path not in self.tracked_paths:
                self.tracked_paths.append(key_path)
            rows = self.all_rows()
            rows.sort(key=lambda r: _cluster_sort_key(self.path_value(r, key_path)))
            old_ids = [b.id for b in self.blocks]
            if self._open is not None and self._open.rows:
                old_ids.append(self._open.id)
            self._retire_blocks(old_ids)
            self.blocks = []
            self._open = self._new_open_block()
            if rows:
                limit = self.store.block_size
                for row in rows:
                    open_block = self._open
                    open_block.rows.append(row)
                    open_block.bytes += len(dumps_compact(list(row))) + 1
                    for path, zm in open_block.zone_maps.items():
                        zm.observe(self.path_value(row, path))
                    if len(open_block.rows) >= limit:
                        self._seal_open()
                self._flush_open()
            self.cluster_key = key_path
            self._commit_catalog()
            return {"blocks": len(self.blocks) + (1 if self._open and self._open.rows else 0)}

    def _retire_blocks(self, block_ids: list[int]) -> None:
        for block_id in block_ids:
            path = self._block_path(block_id)
            if not os.path.exists(path):
                continue
            if self.retention_enabled:
                self.store.recycle_file(self.address, path)
            else:
                os.unlink(path)

    def set_retention(self, enabled: bool) -> None:
        with self._lock:
            self.retention_enabled = enabled
            self._commit_catalog()


def _cluster_sort_key(value):
    return (value is None, sort_key(value))


class TableStore:
    """Manager of all tables under one data directory."""

    def __init__(self, root: str, block_size: int = 4096, retention_days: int = 7,
                 fsync: bool = True, max_depth: int = 64):
        self.root = root
        self.block_size = block_size
        self.retention_days = retention_days
        self.fsync = fsync
        self.max_depth = max_depth
        self._tables: dict[str, Table] = {}
        self._lock = threading.RLock()
        os.makedirs(os.path.join(root, "tables"), exist_ok=True)
        os.makedirs(os.path.join(root, "recycle"), exist_ok=True)

    def _table_dir(self, address: ObjectAddress) -> str:
        return os.path.join(self.root, "tables", address.tenant, *address.namespace.split("."), address.name)

    def create_table(
        self,
        address: ObjectAddress,
        columns: list[Column],
        retention_enabled: bool = True,
        tracked_paths: list[str] | None = None,
    ) -> Table:
        with self._lock:
            key = address.qualified()
            if key in self._tables or os.path.exists(self._table_dir(address)):
                raise DuplicateObject(f"table exists: {key}")
            names = [c.name for c in columns]
            if len(set(names)) != len(names):
                raise TypeMismatch(f"duplicate column names: {names}")
            table = Table(self, address, self._table_dir(address))
            table.columns = list(columns)
            table._reindex()
            table.retention_enabled = retention_enabled
            table.tracked_paths = list(tracked_paths or names)
            os.makedirs(os.path.join(table.dir, "blocks"), exist_ok=True)
            table._commit_catalog()
            self._tables[key] = table
            return table

    def get(self, address: ObjectAddress | str) -> Table:
        key = address if isinstance(address, str) else address.qualified()
        with self._lock:
            table = self._tables.get(key)
            if table is not None:
                return table
            if isinstance(address, str):
                from .core import parse_qualified

                address = parse_qualified(key)
            directory = self._table_dir(address)
            if not os.path.exists(os.path.join(directory, "catalog.json")):
                raise NoSuchTable(f"no such table: {key}")
            table = Table(self, address, directory)
            table._load_from_disk()
            self._tables[key] = table
            return table

    def exists(self, address: ObjectAddress) -> bool:
        return (
            address.qualified() in self._tables
            or os.path.exists(os.path.join(self._table_dir(address), "catalog.json"))
        )

    def drop(self, address: ObjectAddress) -> None:
        with self._lock:
            key = address.qualified()
            table = self._tables.pop(key, None)
            directory = table.dir if table else self._table_dir(address)
            if not os.path.exists(directory):
                raise NoSuchTable(f"no such table: {key}")
            retention = table.retention_enabled if table else True
            if retention:
                target = os.path.join(self.root, "recycle", key + "@" + _fs_stamp())
                os.makedirs(os.path.dirname(target), exist_ok=True)
                shutil.move(directory, target)
            else:
                shutil.rmtree(directory)

    def recycle_file(self, address: ObjectAddress, path: str) -> None:
        target_dir = os.path.join(self.root, "recycle", address.qualified() + "@" + _fs_stamp())
        os.makedirs(target_dir, exist_ok=True)
        shutil.move(path, os.path.join(target_dir, os.path.basename(path)))

    def purge_recycle(self, now: datetime | None = None) -> int:
        """Delete recycled data older than retention_days. Returns entries removed."""
        recycle_root = os.path.join(self.root, "recycle")
        removed = 0
        now_dt = now or datetime.now(timezone.utc)
        for entry in list(os.listdir(recycle_root)):
            stamp = entry.rsplit("@", 1)[-1]
            try:
                entry_dt = datetime.strptime(stamp, _STAMP_FMT).replace(tzinfo=timezone.utc)
            except ValueError:
                continue
            if (now_dt - entry_dt).total_seconds() / 86400.0 > self.retention_days:
                shutil.rmtree(os.path.join(recycle_root, entry), ignore_errors=True)
                removed += 1
        return removed

    def data_bytes(self) -> int:
        """Total bytes under live table block files (recycle excluded)."""
        total = 0
        tables_root = os.path.join(self.root, "tables")
        for dirpath, _dirnames, filenames in os.walk(tables_root):
            for filename in filenames:
                total += os.path.getsize(os.path.join(dirpath, filename))
        return total
