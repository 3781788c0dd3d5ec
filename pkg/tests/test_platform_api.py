"""REST surface, CLI parity, crash recovery, and the end-to-end scenario."""

from __future__ import annotations

import json
import socket
import threading
import time

import httpx
import pytest
from click.testing import CliRunner

from meshmart.api import create_app
from meshmart.cli import main as cli_main
from meshmart.config import PlatformConfig, load_config
from meshmart.errors import ConfigError
from meshmart.platform import open_platform

ROOT_KEY = "root-test-key-000"


def free_port() -> int:
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


@pytest.fixture
def server(tmp_path):
    import uvicorn

    platform = open_platform(
        data_dir=str(tmp_path / "srv"), fsync=False,
        api_keys={ROOT_KEY: "platform/root"},
    )
    app = create_app(platform)
    port = free_port()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    srv = uvicorn.Server(config)
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not srv.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    yield {"url": f"http://127.0.0.1:{port}", "platform": platform, "port": port}
    srv.should_exit = True
    thread.join(timeout=5)
    platform.close()


def api(server, method, path, key=ROOT_KEY, body=None, params=None):
    headers = {"X-Api-Key": key} if key else {}
    return httpx.request(
        method, server["url"] + path, json=body, params=params, headers=headers, timeout=30
    )


def provision_tenant(server, tenant="acme"):
    response = api(server, "POST", "/v1/tenants", body={"id": tenant, "display_name": tenant.title()})
    assert response.status_code == 201, response.text
    return response.json()["api_key"]


class TestRestBasics:
    def test_health_open(self, server):
        response = httpx.get(server["url"] + "/v1/health", timeout=10)
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_mutations_require_key(self, server):
        response = api(server, "POST", "/v1/tenants", key=None,
                       body={"id": "x", "display_name": "X"})
        assert response.status_code == 401

    def test_unknown_key_rejected(self, server):
        response = api(server, "POST", "/v1/tenants", key="bogus",
                       body={"id": "x", "display_name": "X"})
        assert response.status_code == 401

    def test_config_echo_redacts_keys(self, server):
        response = api(server, "GET", "/v1/config")
        assert response.status_code == 200
        assert ROOT_KEY not in response.text
        assert response.json()["api_keys"] == {"<redacted>": ["platform/root"]}

    def test_error_mapping(self, server):
        provision_tenant(server)
        response = api(server, "POST", "/v1/tenants", body={"id": "acme", "display_name": "dup"})
        assert response.status_code == 409
        assert response.json()["error"] == "DuplicateTenant"


class TestIngestionApi:
    def test_stream_lifecycle(self, server):
        key = provision_tenant(server)
        response = api(server, "PUT", "/v1/streams/acme/sales.events/orders", key=key,
                       body={"dedup_key": ["k"]})
        assert response.status_code == 201
        assert response.json()["endpoint"] == "/v1/streams/acme/sales.events/orders/events"

        response = api(server, "POST", "/v1/streams/acme/sales.events/orders/events", key=key,
                       body={"k": 1, "v": "a"})
        assert response.status_code == 202
        assert response.json() == {"accepted": 1}

        response = api(server, "POST", "/v1/streams/acme/sales.events/orders/events", key=key,
                       body=[{"k": 1}, {"k": 2}, {"k": 3}])
        assert response.json() == {"accepted": 3}

        # non-object payload -> 400
        response = httpx.post(
            server["url"] + "/v1/streams/acme/sales.events/orders/events",
            content=b'"just a string"', headers={"X-Api-Key": key, "content-type": "application/json"},
            timeout=10,
        )
        assert response.status_code == 400

        response = api(server, "POST", "/v1/streams/acme/sales.events/orders/load", key=key)
        assert response.json()["loaded"] == 4

        response = api(server, "GET", "/v1/streams/acme/sales.events/orders", key=key)
        doc = response.json()
        assert doc["row_count"] == 4
        assert all(f["state"] == "loaded" for f in doc["staging"])

    def test_unknown_stream_404(self, server):
        key = provision_tenant(server)
        response = api(server, "POST", "/v1/streams/acme/s/na/events", key=key, body={"a": 1})
        assert response.status_code == 404

    def test_oversize_413(self, server):
        key = provision_tenant(server)
        api(server, "PUT", "/v1/streams/acme/s/big", key=key, body={})
        blob = {"data": "x" * (2 * 1024 * 1024)}
        response = api(server, "POST", "/v1/streams/acme/s/big/events", key=key, body=blob)
        assert response.status_code == 413


class TestQueryAndLineageApi:
    def test_query_roundtrip(self, server):
        key = provision_tenant(server)
        response = api(server, "POST", "/v1/query", key=key, body={"sql": "SELECT 1 AS one"})
        doc = response.json()
        assert doc["rows"] == [[1]]
        assert doc["status"] == "success"

    def test_syntax_error_400(self, server):
        key = provision_tenant(server)
        response = api(server, "POST", "/v1/query", key=key, body={"sql": "SELECT FROM"})
        assert response.status_code == 400
        assert response.json()["error"] == "SqlSyntaxError"

    def test_history_api(self, server):
        key = provision_tenant(server)
        api(server, "POST", "/v1/query", key=key, body={"sql": "SELECT 1"})
        response = api(server, "GET", "/v1/history", key=key, params={"tenant": "acme"})
        assert any(r["sql_text"] == "SELECT 1" for r in response.json())


class TestEndToEndScenario:
    def test_full_scenario(self, server):
        """stream -> 1000 events -> loader -> infer -> views -> query -> lineage
        -> product registered and classified."""
        key = provision_tenant(server)
        api(server, "PUT", "/v1/streams/acme/shop/clicks", key=key, body={"cluster_key": "k"})
        batch = [{"k": i % 50, "user": f"u{i % 7}", "items": [{"x": i}, {"x": i + 1}]} for i in range(1000)]
        accepted = 0
        for start in range(0, 1000, 250):
            response = api(server, "POST", "/v1/streams/acme/shop/clicks/events", key=key,
                           body=batch[start:start + 250])
            assert response.status_code == 202
            accepted += response.json()["accepted"]
        assert accepted == 1000
        response = api(server, "POST", "/v1/streams/acme/shop/clicks/load", key=key)
        assert response.json()["loaded"] == 1000

        # infer schema and register generated views
        response = api(server, "POST", "/v1/transform/infer", key=key,
                       body={"table": "acme.shop.clicks", "sample": 500, "emit": "views"})
        assert response.status_code == 200, response.text
        views = response.json()["views"]
        names = {v["address"] for v in views}
        assert "acme.shop.clicks__flat" in names
        assert "acme.shop.clicks__items" in names

        # query the generated flat view
        response = api(server, "POST", "/v1/query", key=key,
                       body={"sql": "SELECT COUNT(*) AS n FROM shop.clicks__flat"})
        assert response.json()["rows"] == [[1000]]
        response = api(server, "POST", "/v1/query", key=key,
                       body={"sql": "SELECT COUNT(*) AS n FROM shop.clicks__items"})
        assert response.json()["rows"] == [[2000]]

        # lineage: stream -> table -> view chain
        response = api(server, "GET", "/v1/lineage", key=key,
                       params={"object": "acme.shop.clicks", "direction": "downstream", "depth": 3})
        graph = response.json()
        ids = {n["id"] for n in graph["nodes"]}
        assert {"acme.shop.clicks", "acme.shop.clicks__flat"} <= ids

        # register a product over the view; expect Stable with good metadata
        response = api(server, "POST", "/v1/products", key=key, body={
            "address": "acme.products.clickstream",
            "resources": ["acme.shop.clicks", "acme.shop.clicks__flat"],
            "support_channel": "#clickstream",
            "description": "Clickstream events flattened for analytics, one row per click with full item detail.",
            "business_objective": "Understand shopper behaviour",
            "tags": ["clicks", "shop"],
        })
        assert response.status_code == 201, response.text
        assert response.json()["class"] == "Stable"

        response = api(server, "GET", "/v1/catalog/search", key=key, params={"q": "clickstream"})
        assert response.json()[0]["address"] == "acme.products.clickstream"


class TestCliParity:
    def test_cli_query_select_1(self, server):
        key = provision_tenant(server)
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--url", server["url"], "--api-key", key, "query", "--sql", "SELECT 1"],
        )
        assert result.exit_code == 0, result.output
        assert result.output.strip() == "1"

    def test_cli_stream_create_prints_endpoint(self, server):
        key = provision_tenant(server)
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--url", server["url"], "--api-key", key,
             "stream", "create", "acme", "sales", "orders"],
        )
        assert result.exit_code == 0, result.output
        assert result.output.strip() == "/v1/streams/acme/sales/orders/events"

    def test_cli_lineage_json_byte_identical_to_rest(self, server):
        key = provision_tenant(server)
        runner = CliRunner()
        runner.invoke(
            cli_main,
            ["--url", server["url"], "--api-key", key, "stream", "create", "acme", "s", "t"],
        )
        api(server, "POST", "/v1/streams/acme/s/t/events", key=key, body={"k": 1})
        api(server, "POST", "/v1/streams/acme/s/t/load", key=key)
        api(server, "POST", "/v1/query", key=key,
            body={"sql": "CREATE TABLE s.t2 AS SELECT _id FROM s.t"})
        result = runner.invoke(
            cli_main,
            ["--url", server["url"], "--api-key", key,
             "lineage", "show", "acme.s.t", "--depth", "2", "--json"],
        )
        assert result.exit_code == 0, result.output
        rest_body = api(server, "GET", "/v1/lineage", key=key,
                        params={"object": "acme.s.t", "direction": "downstream", "depth": 2})
        assert result.output.strip() == rest_body.text.strip()

    def test_cli_error_exit_code(self, server):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["--url", server["url"], "--api-key", "bogus", "tenant", "list"],
        )
        assert result.exit_code == 1


class TestRecovery:
    def test_restart_recovers_metadata_and_acknowledged_events(self, tmp_path):
        data_dir = str(tmp_path / "crash")
        p1 = open_platform(data_dir=data_dir, fsync=False)
        root = p1.catalog.get_principal("platform", "root")
        boot = p1.create_tenant(root, "acme", "Acme")
        admin_ref = boot["admin_principal"]
        p1.streams.create_stream("acme", "s", "ev", {"dedup_key": ["k"]}, created_by=admin_ref)
        accepted = p1.streams.post_events("acme", "s", "ev", [{"k": i} for i in range(25)])
        assert accepted == 25
        # crash: no close(), no compaction, loader never ran
        del p1

        p2 = open_platform(data_dir=data_dir, fsync=False)
        assert p2.catalog.get_tenant("acme").display_name == "Acme"
        definition = p2.streams.get_stream("acme", "s", "ev")
        assert definition["dedup_key"] == ["k"]
        loaded = p2.streams.run_loader_cycle("acme", "s", "ev", force_seal=True)
        assert loaded == 25
        assert p2.tables.get("acme.s.ev").row_count == 25
        p2.close()

        # a third open (post graceful close) sees compacted state
        p3 = open_platform(data_dir=data_dir, fsync=False)
        assert p3.tables.get("acme.s.ev").row_count == 25
        assert p3.catalog.try_resolve("acme.s.ev__dedup") is not None
        p3.close()

    def test_bad_config_refuses_start(self):
        with pytest.raises(ConfigError):
            PlatformConfig(block_size=0).validate()
        with pytest.raises(ConfigError):
            PlatformConfig(advisor_top_share_threshold=1.5).validate()

    def test_config_file_and_env_overrides(self, tmp_path):
        config_file = tmp_path / "mesh.ini"
        config_file.write_text(
            "[platform]\nblock_size = 128\nlisten_port = 9999\n\n"
            "[api_keys]\nsomekey = acme/bot\n"
        )
        cfg = load_config(str(config_file), env={"MESH_BLOCK_SIZE": "256"})
        assert cfg.block_size == 256  # env wins
        assert cfg.listen_port == 9999
        assert cfg.api_keys == {"somekey": "acme/bot"}


class TestBackgroundJobs:
    def test_loader_runs_without_explicit_trigger(self, tmp_path):
        p = open_platform(
            data_dir=str(tmp_path / "bg"), fsync=False,
            loader_interval_s=0.1, staging_seal_age_s=0.0,
        )
        try:
            root = p.catalog.get_principal("platform", "root")
            boot = p.create_tenant(root, "acme", "Acme")
            admin_ref = boot["admin_principal"]
            p.streams.create_stream("acme", "s", "auto", {}, created_by=admin_ref)
            p.streams.post_events("acme", "s", "auto", [{"k": i} for i in range(5)])
            p.start_background()
            deadline = time.time() + 10
            while time.time() < deadline:
                if p.tables.get("acme.s.auto").row_count == 5:
                    break
                time.sleep(0.05)
            assert p.tables.get("acme.s.auto").row_count == 5
        finally:
            p.close()
