"""Tenancy, addressing, and metadata journal/snapshot behavior."""

from __future__ import annotations

import json
import os
import threading

import pytest

from meshmart.core import (
    Catalog,
    MetadataStore,
    ObjectAddress,
    ObjectKind,
    make_address,
    parse_qualified,
)
from meshmart.errors import (
    CorruptJournal,
    DuplicateObject,
    DuplicateTenant,
    InvalidIdentifier,
    MalformedAddress,
    NotFound,
)


@pytest.fixture
def catalog(tmp_path):
    store = MetadataStore(str(tmp_path / "meta"), fsync=False)
    yield Catalog(store)
    store.close()


class TestTenants:
    def test_create_tenant_fresh_store(self, catalog):
        tenant = catalog.create_tenant("acme", "Acme")
        assert tenant.id == "acme"
        assert catalog.get_tenant("acme").display_name == "Acme"

    def test_duplicate_tenant_rejected(self, catalog):
        catalog.create_tenant("acme", "Acme")
        with pytest.raises(DuplicateTenant):
            catalog.create_tenant("acme", "Acme Again")

    def test_bad_identifier_rejected(self, catalog):
        with pytest.raises(InvalidIdentifier):
            catalog.create_tenant("9bad", "Nope")

    def test_identifiers_case_folded(self, catalog):
        tenant = catalog.create_tenant("ACME", "Acme")
        assert tenant.id == "acme"

    def test_too_short_and_too_long(self, catalog):
        with pytest.raises(InvalidIdentifier):
            catalog.create_tenant("a", "one char")
        with pytest.raises(InvalidIdentifier):
            catalog.create_tenant("a" * 33, "too long")


class TestAddresses:
    def test_three_segment_roundtrip(self):
        addr = parse_qualified("acme.sales.orders")
        assert (addr.tenant, addr.namespace, addr.name) == ("acme", "sales", "orders")

    def test_four_segment_namespace(self):
        addr = parse_qualified("acme.sales.events.orders")
        assert addr.namespace == "sales.events"

    def test_two_segments_malformed(self):
        with pytest.raises(MalformedAddress):
            parse_qualified("acme.sales")

    def test_five_segments_malformed(self):
        with pytest.raises(MalformedAddress):
            parse_qualified("a.b.c.d.e")

    def test_resolve_returns_single_object(self, catalog):
        catalog.create_tenant("acme", "Acme")
        addr = make_address("acme", "sales", "orders", ObjectKind.TABLE)
        catalog.register_object(addr, {"columns": []})
        resolved, record = catalog.resolve("acme.sales.orders")
        assert resolved.kind == ObjectKind.TABLE
        assert record.body["kind"] == "table"

    def test_resolve_dropped_object_not_found(self, catalog):
        catalog.create_tenant("acme", "Acme")
        addr = make_address("acme", "sales", "orders", ObjectKind.TABLE)
        catalog.register_object(addr, {})
        catalog.drop_object(addr)
        with pytest.raises(NotFound):
            catalog.resolve("acme.sales.orders")

    def test_no_two_live_objects_share_address(self, catalog):
        catalog.create_tenant("acme", "Acme")
        addr = make_address("acme", "sales", "orders", ObjectKind.TABLE)
        catalog.register_object(addr, {})
        clash = make_address("acme", "sales", "orders", ObjectKind.VIEW)
        with pytest.raises(DuplicateObject):
            catalog.register_object(clash, {})

    def test_drop_then_recreate_allowed(self, catalog):
        catalog.create_tenant("acme", "Acme")
        addr = make_address("acme", "sales", "orders", ObjectKind.TABLE)
        catalog.register_object(addr, {})
        catalog.drop_object(addr)
        catalog.register_object(addr, {"generation": 2})

    def test_tenant_isolation_in_listing(self, catalog):
        catalog.create_tenant("acme", "Acme")
        catalog.create_tenant("globex", "Globex")
        catalog.register_object(make_address("acme", "s", "t1", ObjectKind.TABLE), {})
        catalog.register_object(make_address("globex", "s", "t2", ObjectKind.TABLE), {})
        for address, _rec in catalog.list_objects(tenant="acme"):
            assert address.tenant == "acme"


class TestMetadataVersions:
    def test_versions_increment(self, tmp_path):
        store = MetadataStore(str(tmp_path / "m"), fsync=False)
        assert store.put("~sys/x", {"v": 1}) == 1
        assert store.put("~sys/x", {"v": 2}) == 2
        store.close()

    def test_concurrent_writers_gap_free(self, tmp_path):
        store = MetadataStore(str(tmp_path / "m"), fsync=False)
        versions: list[int] = []
        lock = threading.Lock()

        def writer():
            for _ in range(50):
                v = store.put("~sys/hot", {"w": 1})
                with lock:
                    versions.append(v)

        threads = [threading.Thread(target=writer) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(versions) == list(range(1, 401))
        store.close()

    def test_recovery_from_journal(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("~sys/a", {"x": 1})
        store.put("~sys/a", {"x": 2})
        store._journal_fh.close()  # simulate crash: no compaction
        store._journal_fh = open(os.devnull, "w")
        reopened = MetadataStore(root, fsync=False)
        assert reopened.get("~sys/a").body == {"x": 2}
        assert reopened.get("~sys/a").version == 2
        reopened.close()

    def test_recovery_after_compaction(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("~sys/a", {"x": 1})
        store.compact()
        store.put("~sys/a", {"x": 2})
        store._journal_fh.close()
        store._journal_fh = open(os.devnull, "w")
        reopened = MetadataStore(root, fsync=False)
        assert reopened.get("~sys/a").body == {"x": 2}
        reopened.close()

    def test_torn_final_line_dropped(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("~sys/a", {"x": 1})
        store._journal_fh.close()
        store._journal_fh = open(os.devnull, "w")
        with open(os.path.join(root, "journal.jsonl"), "a", encoding="utf-8") as fh:
            fh.write('{"key": "~sys/a", "version": 2, "bo')  # torn write
        reopened = MetadataStore(root, fsync=False)
        assert reopened.get("~sys/a").body == {"x": 1}
        reopened.close()

    def test_mid_journal_corruption_refuses_start(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("~sys/a", {"x": 1})
        store.put("~sys/b", {"x": 2})
        store._journal_fh.close()
        store._journal_fh = open(os.devnull, "w")
        journal = os.path.join(root, "journal.jsonl")
        lines = open(journal, encoding="utf-8").read().splitlines()
        lines[0] = "GARBAGE NOT JSON"
        with open(journal, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        with pytest.raises(CorruptJournal):
            MetadataStore(root, fsync=False)

    def test_snapshot_mirrors_tenant_namespace_tree(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("acme.sales.orders", {"kind": "table"})
        store.compact()
        assert os.path.exists(os.path.join(root, "snapshot", "acme", "sales", "orders.json"))
        doc = json.load(open(os.path.join(root, "snapshot", "acme", "sales", "orders.json")))
        assert doc["body"] == {"kind": "table"}
        store.close()

    def test_journal_line_format(self, tmp_path):
        root = str(tmp_path / "m")
        store = MetadataStore(root, fsync=False)
        store.put("acme.sales.orders", {"kind": "table"})
        line = open(os.path.join(root, "journal.jsonl"), encoding="utf-8").readline()
        doc = json.loads(line)
        assert set(doc) == {"key", "version", "body", "updated_at"}
        store.close()
