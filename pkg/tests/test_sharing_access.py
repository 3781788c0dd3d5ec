"""Groups, grants, zero-copy shares, and compatibility verification."""

from __future__ import annotations

import random

import pytest

from meshmart.errors import AccessDenied, BreakingChange
from meshmart.fieldtypes import parse_type, le


def seed_table(platform, admin, name="orders", tenant="acme", rows=3):
    platform.streams.create_stream(tenant, "sales", name, {}, created_by=admin.ref())
    platform.streams.post_events(tenant, "sales", name, [{"k": i} for i in range(rows)])
    platform.streams.run_loader_cycle(tenant, "sales", name, force_seal=True)
    return f"{tenant}.sales.{name}"


class TestGroupsAndGrants:
    def test_owner_grants_read_members_can_query(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        analyst = p.catalog.create_principal("acme", "ana", kind="human")
        p.access.create_group("acme", "readers", admin)
        p.access.add_member("acme", "readers", "acme/ana", admin)
        p.access.grant("acme", "readers", [table], ["READ"], admin)
        assert p.access.check_access(analyst, table, "READ") is True
        cols, rows, rec = p.execute_sql(analyst, f"SELECT COUNT(*) AS n FROM {table}")
        assert rows == [(3,)]

    def test_non_admin_grant_denied(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        outsider = p.catalog.create_principal("acme", "rogue", kind="human")
        p.access.create_group("acme", "readers", admin)
        with pytest.raises(AccessDenied):
            p.access.grant("acme", "readers", [table], ["READ"], outsider)

    def test_machine_principals_across_tenants_single_group(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        bot = p.catalog.create_principal("globex", "bot", kind="machine")
        p.access.create_group("acme", "bots", admin)
        p.access.add_member("acme", "bots", "globex/bot", admin)
        p.access.grant("acme", "bots", [table], ["READ"], admin)
        assert p.access.check_access(bot, table, "READ") is True

    def test_namespace_glob_grant(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        writer = p.catalog.create_principal("acme", "w1", kind="machine")
        p.access.create_group("acme", "writers", admin)
        p.access.add_member("acme", "writers", "acme/w1", admin)
        p.access.grant("acme", "writers", ["acme.sales.*"], ["READ", "WRITE"], admin)
        assert p.access.check_access(writer, table, "WRITE") is True
        assert p.access.check_access(writer, "acme.other.t", "WRITE") is False

    def test_cross_tenant_resource_in_group_rejected(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        g_admin = acme["globex_admin"]
        foreign = seed_table(p, g_admin, tenant="globex")
        p.access.create_group("acme", "bad", admin)
        with pytest.raises(AccessDenied):
            p.access.grant("acme", "bad", [foreign], ["READ"], admin)


class TestShares:
    def test_cross_tenant_read_without_share_denied(self, acme):
        p = acme["platform"]
        table = seed_table(p, acme["acme_admin"])
        g_admin = acme["globex_admin"]
        assert p.access.check_access(g_admin, table, "READ") is False
        with pytest.raises(AccessDenied):
            p.execute_sql(g_admin, f"SELECT * FROM {table}")
        history = p.gateway.query_history(tenant="globex")
        assert history[-1]["status"] == "error"
        assert "AccessDenied" in history[-1]["error_text"]

    def test_share_enables_read_and_is_zero_copy(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        g_admin = acme["globex_admin"]
        table = seed_table(p, admin)
        bytes_before = p.tables.data_bytes()
        share = p.access.create_share(admin, "globex", [table])
        cols, rows, rec = p.execute_sql(g_admin, f"SELECT COUNT(*) AS n FROM {table}")
        assert rows == [(3,)]
        assert f"acme.shares.{share['id']}" in rec["dependencies"]["reads"]
        assert p.tables.data_bytes() == bytes_before
        p.access.revoke_share(share["id"], admin)
        assert p.tables.data_bytes() == bytes_before
        with pytest.raises(AccessDenied):
            p.execute_sql(g_admin, f"SELECT * FROM {table}")

    def test_shared_write_denied(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        g_admin = acme["globex_admin"]
        table = seed_table(p, admin)
        p.access.create_share(admin, "globex", [table])
        with pytest.raises(AccessDenied):
            p.execute_sql(g_admin, f"INSERT INTO {table} SELECT * FROM {table}")

    def test_share_requires_producer_admin(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        member = p.catalog.create_principal("acme", "pleb", kind="human")
        with pytest.raises(AccessDenied):
            p.access.create_share(member, "globex", [table])


class TestCompatibility:
    def make_share(self, acme, columns=None):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        share = p.access.create_share(admin, "globex", [table])
        current = [("_id", "STRING"), ("_received_at", "STRING"), ("_file", "STRING"), ("payload", "VARIANT")]
        return p, share, table, current

    def test_drop_column_breaking(self, acme):
        p, share, table, current = self.make_share(acme)
        new_cols = [{"name": n, "type": t} for n, t in current if n != "payload"]
        verdict = p.access.verify_share_compatibility(
            share["id"], {"object": table, "new_columns": new_cols}, current_columns=current
        )
        assert verdict.verdict == "breaking"
        assert verdict.violations[0]["kind"] == "dropped_column"

    def test_add_column_compatible(self, acme):
        p, share, table, current = self.make_share(acme)
        new_cols = [{"name": n, "type": t} for n, t in current] + [{"name": "extra", "type": "INT"}]
        verdict = p.access.verify_share_compatibility(
            share["id"], {"object": table, "new_columns": new_cols}, current_columns=current
        )
        assert verdict.verdict == "compatible"

    def test_rename_breaking(self, acme):
        p, share, table, current = self.make_share(acme)
        new_cols = [
            {"name": ("body" if n == "payload" else n), "type": t} for n, t in current
        ]
        verdict = p.access.verify_share_compatibility(
            share["id"],
            {"object": table, "new_columns": new_cols, "renames": {"payload": "body"}},
            current_columns=current,
        )
        assert verdict.verdict == "breaking"
        assert any(v["kind"] == "renamed_column" for v in verdict.violations)

    def test_widen_compatible_narrow_breaking(self, acme):
        p, share, table, _current = self.make_share(acme)
        current = [("x", "INT")]
        widened = p.access.verify_share_compatibility(
            share["id"], {"object": table, "new_columns": [{"name": "x", "type": "FLOAT"}]},
            current_columns=current,
        )
        assert widened.verdict == "compatible"
        narrowed = p.access.verify_share_compatibility(
            share["id"], {"object": table, "new_columns": [{"name": "x", "type": "INT"}]},
            current_columns=[("x", "FLOAT")],
        )
        assert narrowed.verdict == "breaking"
        assert narrowed.violations[0]["kind"] == "type_narrowed"

    def test_exhaustive_lattice_pairs(self, acme):
        p, share, table, _current = self.make_share(acme)
        types = ["NULL", "BOOL", "INT", "FLOAT", "STRING", "VARIANT", "OBJECT",
                 "ARRAY<INT>", "ARRAY<FLOAT>", "ARRAY<STRING>", "ARRAY<ARRAY<INT>>"]
        for old in types:
            for new in types:
                verdict = p.access.verify_share_compatibility(
                    share["id"],
                    {"object": table, "new_columns": [{"name": "x", "type": new}]},
                    current_columns=[("x", old)],
                )
                expect_breaking = not le(parse_type(old), parse_type(new))
                assert (verdict.verdict == "breaking") == expect_breaking, (old, new)

    def test_view_referencing_unshared_object_breaking(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        other = seed_table(p, admin, name="secrets")
        p.execute_sql(admin, f"CREATE VIEW sales.v AS SELECT _id FROM {table}")
        share = p.access.create_share(admin, "globex", [f"acme.sales.v", table])
        verdict = p.access.verify_share_compatibility(
            share["id"],
            {"object": "acme.sales.v", "view_sql": "SELECT _id FROM acme.sales.secrets"},
            view_reads={other},
        )
        assert verdict.verdict == "breaking"
        assert verdict.violations[0]["kind"] == "unshared_reference"

    def test_gate_blocks_drop_of_shared_object(self, acme):
        p = acme["platform"]
        admin = acme["acme_admin"]
        table = seed_table(p, admin)
        p.access.create_share(admin, "globex", [table])
        with pytest.raises(BreakingChange):
            p.execute_sql(admin, f"DROP TABLE {table}")
        # force acknowledges and notifies the consumer
        p.execute_sql(admin, f"DROP TABLE {table}", force=True)
        inbox = p.read_inbox("globex")
        assert any(n["type"] == "breaking_change" for n in inbox)


class TestIsolationProperty:
    def test_random_grant_share_matrices(self, acme):
        """Every allowed READ is justified by the documented disjunction."""
        p = acme["platform"]
        admin = acme["acme_admin"]
        g_admin = acme["globex_admin"]
        tables = [seed_table(p, admin, name=f"t{i}", rows=1) for i in range(3)]
        g_tables = [seed_table(p, g_admin, name=f"g{i}", tenant="globex", rows=1) for i in range(2)]
        principals = [admin, g_admin]
        for tenant, n in (("acme", 2), ("globex", 2)):
            for i in range(n):
                principals.append(p.catalog.create_principal(tenant, f"u{tenant}{i}", kind="human"))
        rng = random.Random(99)
        all_tables = tables + g_tables
        for trial in range(60):
            group_id = f"grp{trial}"
            tenant = rng.choice(["acme", "globex"])
            owner = admin if tenant == "acme" else g_admin
            p.access.create_group(tenant, group_id, owner)
            members = rng.sample([pr.ref() for pr in principals], rng.randint(0, 3))
            for ref in members:
                p.access.add_member(tenant, group_id, ref, owner)
            grantable = [t for t in all_tables if t.startswith(tenant + ".")]
            chosen = rng.sample(grantable, rng.randint(0, len(grantable)))
            perms = rng.sample(["READ", "WRITE", "MANAGE"], rng.randint(1, 3))
            if chosen:
                p.access.grant(tenant, group_id, chosen, perms, owner)
            if rng.random() < 0.4:
                producer, consumer = rng.choice([("acme", "globex"), ("globex", "acme")])
                share_owner = admin if producer == "acme" else g_admin
                objs = [t for t in all_tables if t.startswith(producer + ".")]
                p.access.create_share(share_owner, consumer, rng.sample(objs, 1))
            # verify the postcondition disjunction for every (principal, table)
            groups = p.access.list_groups()
            shares = [s for s in p.access.list_shares() if s["state"] == "active"]
            for principal in principals:
                for table in all_tables:
                    allowed = p.access.check_access(principal, table, "READ")
                    expected = (
                        (principal.admin and principal.tenant == table.split(".")[0])
                        or any(
                            principal.ref() in g["members"]
                            and "READ" in g["permissions"]
                            and any(
                                (r == table) or (r.endswith(".*") and table.startswith(r[:-1]))
                                for r in g["resources"]
                            )
                            for g in groups
                            if g["tenant"] == table.split(".")[0]
                        )
                        or any(
                            table in s["objects"] and s["consumer"] == principal.tenant
                            for s in shares
                        )
                    )
                    assert allowed == expected, (trial, principal.ref(), table)
