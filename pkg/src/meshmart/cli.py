"""Operator CLI: every verb maps 1:1 onto the REST surface over HTTP.

--json prints the raw response body byte-for-byte (CI-friendly); the
default output is a light human rendering. Connection settings come from
--url/--api-key or MESH_URL / MESH_API_KEY.
"""

from __future__ import annotations

import json
import os
import sys

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8423"


class Ctx:
    def __init__(self, url: str, api_key: str):
        self.url = url.rstrip("/")
        self.api_key = api_key

    def request(self, method: str, path: str, body=None, params=None) -> httpx.Response:
        headers = {}
        if self.api_key:
            headers["X-Api-Key"] = self.api_key
        return httpx.request(
            method, self.url + path, json=body, params=params, headers=headers, timeout=60.0
        )


def emit(ctx_obj, response: httpx.Response, as_json: bool, render=None) -> None:
    if response.status_code >= 400:
        sys.stderr.write(response.text + "\n")
        sys.exit(1)
    if as_json or render is None:
        sys.stdout.write(response.text + "\n")
        return
    render(response.json())


@click.group()
@click.option("--url", default=lambda: os.environ.get("MESH_URL", DEFAULT_URL), help="API base URL")
@click.option("--api-key", default=lambda: os.environ.get("MESH_API_KEY", ""), help="API key")
@click.pass_context
def main(ctx, url, api_key):
    """meshmart: desk-scale data platform and data-product marketplace."""
    ctx.obj = Ctx(url, api_key)


@main.command()
@click.option("--config", "config_path", default=None, help="INI config file")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--data-dir", default=None)
def serve(config_path, host, port, data_dir):
    """Start the platform service."""
    import uvicorn

    from .api import create_app
    from .config import load_config
    from .errors import BindFailure
    from .platform import Platform

    cfg = load_config(config_path)
    if host:
        cfg.listen_host = host
    if port:
        cfg.listen_port = port
    if data_dir:
        cfg.data_dir = data_dir
    platform = Platform(cfg)
    app = create_app(platform)
    platform.start_background()
    click.echo(f"meshmart serving on {cfg.listen_host}:{cfg.listen_port} (data: {cfg.data_dir})")
    try:
        uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port, log_level="warning")
    except OSError as exc:
        raise BindFailure(f"cannot bind {cfg.listen_host}:{cfg.listen_port}: {exc}")
    finally:
        platform.close()


# -- tenant ----------------------------------------------------------------------

@main.group()
def tenant():
    """Tenant management."""


@tenant.command("create")
@click.argument("tenant_id")
@click.argument("display_name")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def tenant_create(ctx, tenant_id, display_name, as_json):
    response = ctx.request("POST", "/v1/tenants", {"id": tenant_id, "display_name": display_name})
    emit(ctx, response, as_json,
         lambda d: click.echo(f"tenant {d['tenant']['id']} created; admin key: {d['api_key']}"))


@tenant.command("list")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def tenant_list(ctx, as_json):
    emit(ctx, ctx.request("GET", "/v1/tenants"), as_json,
         lambda ds: [click.echo(f"{d['id']}\t{d['display_name']}") for d in ds])


# -- stream -----------------------------------------------------------------------

@main.group()
def stream():
    """Ingestion streams."""


@stream.command("create")
@click.argument("tenant_id")
@click.argument("namespace")
@click.argument("name")
@click.option("--dedup-key", multiple=True, help="payload path(s) for the dedup view")
@click.option("--version-key", nargs=2, default=None, help="entity path + ordering path")
@click.option("--cluster-key", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def stream_create(ctx, tenant_id, namespace, name, dedup_key, version_key, cluster_key, as_json):
    options: dict = {}
    if dedup_key:
        options["dedup_key"] = list(dedup_key)
    if version_key:
        options["version_key"] = list(version_key)
    if cluster_key:
        options["cluster_key"] = cluster_key
    response = ctx.request("PUT", f"/v1/streams/{tenant_id}/{namespace}/{name}", options)
    emit(ctx, response, as_json, lambda d: click.echo(d["endpoint"]))


@stream.command("describe")
@click.argument("tenant_id")
@click.argument("namespace")
@click.argument("name")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def stream_describe(ctx, tenant_id, namespace, name, as_json):
    emit(ctx, ctx.request("GET", f"/v1/streams/{tenant_id}/{namespace}/{name}"), as_json,
         lambda d: click.echo(json.dumps(d, indent=2)))


@stream.command("load")
@click.argument("tenant_id")
@click.argument("namespace")
@click.argument("name")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def stream_load(ctx, tenant_id, namespace, name, as_json):
    response = ctx.request("POST", f"/v1/streams/{tenant_id}/{namespace}/{name}/load", {"force": True})
    emit(ctx, response, as_json, lambda d: click.echo(f"loaded {d['loaded']} events"))


@main.command()
@click.argument("tenant_id")
@click.argument("namespace")
@click.argument("name")
@click.option("--data", default=None, help="inline JSON object or array")
@click.option("--file", "path", default=None, help="file of JSON (object/array) or JSONL")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def ingest(ctx, tenant_id, namespace, name, data, path, as_json):
    """Post events to a stream endpoint."""
    if data:
        body = json.loads(data)
    elif path:
        text = open(path, encoding="utf-8").read().strip()
        try:
            body = json.loads(text)
        except ValueError:
            body = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        raise click.UsageError("provide --data or --file")
    response = ctx.request("POST", f"/v1/streams/{tenant_id}/{namespace}/{name}/events", body)
    emit(ctx, response, as_json, lambda d: click.echo(f"accepted {d['accepted']}"))


# -- query ------------------------------------------------------------------------------

@main.command()
@click.option("--sql", required=True)
@click.option("--warehouse", default="default")
@click.option("--force", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def query(ctx, sql, warehouse, force, as_json):
    """Execute SQL under a fresh session."""
    response = ctx.request("POST", "/v1/query", {"sql": sql, "warehouse": warehouse, "force": force})

    def render(d):
        for row in d["rows"]:
            click.echo("\t".join("" if v is None else str(v) for v in row))

    emit(ctx, response, as_json, render)


@main.command()
@click.option("--tenant", default=None)
@click.option("--object", "obj", default=None)
@click.option("--from", "from_ts", default=None)
@click.option("--to", "to_ts", default=None)
@click.option("--limit", default=None, type=int)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def history(ctx, tenant, obj, from_ts, to_ts, limit, as_json):
    """Query history (sensing records)."""
    params = {k: v for k, v in {
        "tenant": tenant, "object": obj, "from_ts": from_ts, "to_ts": to_ts, "limit": limit,
    }.items() if v is not None}
    emit(ctx, ctx.request("GET", "/v1/history", params=params), as_json,
         lambda ds: [click.echo(f"{d['query_id']}\t{d['status']}\t{d['sql_text'][:60]}") for d in ds])


# -- catalog ------------------------------------------------------------------------------

@main.group()
def catalog():
    """Marketplace catalog."""


@catalog.command("search")
@click.option("-q", "query_text", default="")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def catalog_search(ctx, query_text, as_json):
    emit(ctx, ctx.request("GET", "/v1/catalog/search", params={"q": query_text}), as_json,
         lambda ds: [click.echo(f"{d['address']}\t{d['class']}\t{d['score']:.3f}") for d in ds])


@catalog.command("register")
@click.argument("address")
@click.option("--resource", "resources", multiple=True, required=True)
@click.option("--support-channel", default="")
@click.option("--description", default="")
@click.option("--objective", default="")
@click.option("--tag", "tags", multiple=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def catalog_register(ctx, address, resources, support_channel, description, objective, tags, as_json):
    body = {
        "address": address,
        "resources": list(resources),
        "support_channel": support_channel,
        "description": description,
        "business_objective": objective,
        "tags": list(tags),
    }
    emit(ctx, ctx.request("POST", "/v1/products", body), as_json,
         lambda d: click.echo(f"{d['address']} registered ({d['class']})"))


@catalog.command("evaluate")
@click.argument("address")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def catalog_evaluate(ctx, address, as_json):
    emit(ctx, ctx.request("POST", f"/v1/products/{address}/evaluate"), as_json,
         lambda d: click.echo(f"{address}: {d['class']}"))


@catalog.command("feedback")
@click.argument("address")
@click.argument("rating", type=int)
@click.option("--comment", default="")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def catalog_feedback(ctx, address, rating, comment, as_json):
    emit(ctx, ctx.request("POST", f"/v1/products/{address}/feedback",
                          {"rating": rating, "comment": comment}), as_json,
         lambda d: click.echo("recorded"))


# -- lineage --------------------------------------------------------------------------------

@main.group()
def lineage():
    """Dependency lineage."""


@lineage.command("show")
@click.argument("obj")
@click.option("--direction", default="downstream", type=click.Choice(["upstream", "downstream"]))
@click.option("--depth", default=5, type=int)
@click.option("--from", "from_ts", default=None)
@click.option("--to", "to_ts", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def lineage_show(ctx, obj, direction, depth, from_ts, to_ts, as_json):
    params = {"object": obj, "direction": direction, "depth": depth}
    if from_ts:
        params["from_ts"] = from_ts
    if to_ts:
        params["to_ts"] = to_ts
    def render(d):
        for node in d["nodes"]:
            click.echo(f"node\t{node['kind']}\t{node['id']}")
        for edge in d["edges"]:
            click.echo(
                f"edge\t{edge['src']['id']} -{edge['relation']}-> {edge['dst']['id']} (w={edge['weight']})"
            )
    emit(ctx, ctx.request("GET", "/v1/lineage", params=params), as_json, render)


# -- transform --------------------------------------------------------------------------------

@main.group()
def transform():
    """Schema-on-read tooling."""


@transform.command("infer")
@click.option("--stream", "qualified", required=True, help="stream/base table address")
@click.option("--sample", default=1000, type=int)
@click.option("--emit", "emit_mode", default="schema-json",
              type=click.Choice(["schema-json", "sql", "views"]))
@click.option("--force", is_flag=True, help="replace existing generated views")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def transform_infer(ctx, qualified, sample, emit_mode, force, as_json):
    body = {"table": qualified, "sample": sample, "emit": emit_mode, "force": force}
    emit(ctx, ctx.request("POST", "/v1/transform/infer", body), as_json,
         lambda d: click.echo(json.dumps(d, indent=2)))


# -- suggest -----------------------------------------------------------------------------------

@main.group()
def suggest():
    """Optimization suggestions."""


@suggest.command("list")
@click.option("--tenant", default=None)
@click.option("--state", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def suggest_list(ctx, tenant, state, as_json):
    params = {k: v for k, v in {"tenant": tenant, "state": state}.items() if v}
    emit(ctx, ctx.request("GET", "/v1/suggestions", params=params), as_json,
         lambda ds: [click.echo(f"{d['id']}\t{d['kind']}\t{d['target']}\t{d['state']}") for d in ds])


@suggest.command("sweep")
@click.option("--table", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def suggest_sweep(ctx, table, as_json):
    body = {"table": table} if table else {}
    emit(ctx, ctx.request("POST", "/v1/suggestions/sweep", body), as_json,
         lambda d: click.echo(f"created {len(d['created'])}"))


@suggest.command("resolve")
@click.argument("suggestion_id")
@click.argument("decision", type=click.Choice(["accept", "reject"]))
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def suggest_resolve(ctx, suggestion_id, decision, as_json):
    emit(ctx, ctx.request("POST", f"/v1/suggestions/{suggestion_id}/resolve",
                          {"decision": decision}), as_json,
         lambda d: click.echo(f"{d['id']} -> {d['state']}"))


# -- pii ----------------------------------------------------------------------------------------

@main.group()
def pii():
    """PII scanning."""


@pii.command("scan")
@click.argument("address")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def pii_scan(ctx, address, as_json):
    emit(ctx, ctx.request("POST", f"/v1/pii/scan/{address}"), as_json,
         lambda ds: [click.echo(f"{d['id']}\t{d['path']}\t{d['pii_class']}\t{d['confidence']}") for d in ds])


@pii.command("findings")
@click.option("--tenant", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def pii_findings(ctx, tenant, as_json):
    params = {"tenant": tenant} if tenant else {}
    emit(ctx, ctx.request("GET", "/v1/pii/findings", params=params), as_json,
         lambda ds: [click.echo(f"{d['id']}\t{d['table']}\t{d['path']}\t{d['state']}") for d in ds])


@pii.command("resolve")
@click.argument("finding_id")
@click.argument("state", type=click.Choice(["confirmed", "dismissed"]))
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def pii_resolve(ctx, finding_id, state, as_json):
    emit(ctx, ctx.request("POST", f"/v1/pii/findings/{finding_id}/resolve", {"state": state}),
         as_json, lambda d: click.echo(f"{d['id']} -> {d['state']}"))


# -- share / group ---------------------------------------------------------------------------------

@main.group()
def share():
    """Zero-copy cross-tenant shares."""


@share.command("create")
@click.option("--consumer", required=True)
@click.option("--object", "objects", multiple=True, required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def share_create(ctx, consumer, objects, as_json):
    emit(ctx, ctx.request("POST", "/v1/shares", {"consumer": consumer, "objects": list(objects)}),
         as_json, lambda d: click.echo(d["id"]))


@share.command("list")
@click.option("--tenant", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def share_list(ctx, tenant, as_json):
    params = {"tenant": tenant} if tenant else {}
    emit(ctx, ctx.request("GET", "/v1/shares", params=params), as_json,
         lambda ds: [click.echo(f"{d['id']}\t{d['producer']} -> {d['consumer']}\t{d['state']}") for d in ds])


@share.command("revoke")
@click.argument("share_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def share_revoke(ctx, share_id, as_json):
    emit(ctx, ctx.request("POST", f"/v1/shares/{share_id}/revoke"), as_json,
         lambda d: click.echo(f"{d['id']} revoked"))


@share.command("verify")
@click.argument("share_id")
@click.option("--file", "path", required=True, help="proposed change JSON")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def share_verify(ctx, share_id, path, as_json):
    proposed = json.loads(open(path, encoding="utf-8").read())
    emit(ctx, ctx.request("POST", f"/v1/shares/{share_id}/verify", {"proposed": proposed}),
         as_json, lambda d: click.echo(d["verdict"]))


@main.group()
def group():
    """Access groups."""


@group.command("create")
@click.argument("tenant_id")
@click.argument("group_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def group_create(ctx, tenant_id, group_id, as_json):
    emit(ctx, ctx.request("POST", "/v1/groups", {"tenant": tenant_id, "id": group_id}), as_json,
         lambda d: click.echo(f"group {d['id']} created"))


@group.command("add-member")
@click.argument("tenant_id")
@click.argument("group_id")
@click.argument("member_ref")
@click.option("--admin", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def group_add_member(ctx, tenant_id, group_id, member_ref, admin, as_json):
    emit(ctx, ctx.request("POST", f"/v1/groups/{tenant_id}/{group_id}/members",
                          {"member": member_ref, "admin": admin}), as_json,
         lambda d: click.echo("ok"))


@group.command("grant")
@click.argument("tenant_id")
@click.argument("group_id")
@click.option("--resource", "resources", multiple=True, required=True)
@click.option("--permission", "permissions", multiple=True, required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def group_grant(ctx, tenant_id, group_id, resources, permissions, as_json):
    emit(ctx, ctx.request("POST", f"/v1/groups/{tenant_id}/{group_id}/grant",
                          {"resources": list(resources), "permissions": list(permissions)}),
         as_json, lambda d: click.echo("ok"))


if __name__ == "__main__":
    main()
