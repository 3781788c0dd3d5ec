"""REST surface binding every module; single process, JSON in and out.

Every mutating route authenticates via the X-Api-Key header to a
Principal; domain errors map to HTTP statuses in one exception handler.
Route semantics live in the platform modules, not here.
"""

from __future__ import annotations

import os

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, Response

from .errors import MalformedPayload, MeshError, PayloadTooLarge, Unauthenticated
from .platform import Platform
from .util import dumps_compact


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="meshmart", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.platform = platform

    @app.exception_handler(MeshError)
    def mesh_error_handler(_request: Request, exc: MeshError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_dict())

    def auth(x_api_key: str | None = Header(default=None)):
        return platform.authenticate(x_api_key)

    def json_response(doc, status_code: int = 200) -> Response:
        return Response(
            content=dumps_compact(doc), status_code=status_code, media_type="application/json"
        )

    # -- health & config --------------------------------------------------------

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": "0.1.0"}

    @app.get("/v1/config")
    def config_echo(principal=Depends(auth)):
        return json_response(platform.config.redacted())

    # -- tenancy -------------------------------------------------------------------

    @app.post("/v1/tenants", status_code=201)
    def create_tenant(body: dict, principal=Depends(auth)):
        return json_response(
            platform.create_tenant(principal, body.get("id", ""), body.get("display_name", "")),
            201,
        )

    @app.get("/v1/tenants")
    def list_tenants(principal=Depends(auth)):
        return json_response(
            [
                {"id": t.id, "display_name": t.display_name, "created_at": t.created_at}
                for t in platform.catalog.list_tenants()
            ]
        )

    @app.post("/v1/principals", status_code=201)
    def create_principal(body: dict, principal=Depends(auth)):
        return json_response(
            platform.create_principal(
                principal,
                body.get("tenant", ""),
                body.get("id", ""),
                kind=body.get("kind", "human"),
                admin=bool(body.get("admin", False)),
            ),
            201,
        )

    @app.get("/v1/objects")
    def list_objects(tenant: str | None = None, principal=Depends(auth)):
        out = []
        for address, rec in platform.catalog.list_objects(tenant=tenant):
            out.append(
                {
                    "address": address.qualified(),
                    "kind": address.kind.value,
                    "tenant": address.tenant,
                }
            )
        return json_response(out)

    # -- streams ----------------------------------------------------------------------

    @app.put("/v1/streams/{tenant}/{namespace}/{name}", status_code=201)
    def create_stream(tenant: str, namespace: str, name: str, body: dict | None = None,
                      principal=Depends(auth)):
        from .errors import AccessDenied

        target = f"{tenant}.{namespace}.{name}"
        if not platform.access.check_access(principal, target, "WRITE"):
            raise AccessDenied(f"{principal.ref()} lacks WRITE on namespace of {target}")
        return json_response(
            platform.streams.create_stream(tenant, namespace, name, body or {},
                                           created_by=principal.ref()),
            201,
        )

    @app.get("/v1/streams/{tenant}/{namespace}/{name}")
    def describe_stream(tenant: str, namespace: str, name: str, principal=Depends(auth)):
        definition = platform.streams.get_stream(tenant, namespace, name)
        files = platform.streams.staged_files(tenant, namespace, name)
        definition["staging"] = [
            {"path": f.relpath, "state": f.state, "event_count": f.event_count} for f in files
        ]
        definition["row_count"] = platform.tables.get(definition["base_table"]).row_count
        return json_response(definition)

    @app.post("/v1/streams/{tenant}/{namespace}/{name}/events", status_code=202)
    async def post_events(tenant: str, namespace: str, name: str, request: Request,
                          principal=Depends(auth)):
        raw = await request.body()
        if len(raw) > platform.config.post_limit_bytes:
            raise PayloadTooLarge(
                f"body {len(raw)} bytes exceeds limit {platform.config.post_limit_bytes}"
            )
        import json as json_mod

        try:
            parsed = json_mod.loads(raw)
        except ValueError as exc:
            raise MalformedPayload(f"body is not valid JSON: {exc}")
        if isinstance(parsed, dict):
            payloads = [parsed]
        elif isinstance(parsed, list):
            payloads = parsed
        else:
            raise MalformedPayload("body must be a JSON object or array of objects")
        from .errors import AccessDenied

        target = f"{tenant}.{namespace}.{name}"
        if not platform.access.check_access(principal, target, "WRITE"):
            raise AccessDenied(f"{principal.ref()} lacks WRITE on {target}")
        accepted = platform.streams.post_events(
            tenant, namespace, name, payloads,
            client_event_id=request.headers.get("x-event-id"),
        )
        return json_response({"accepted": accepted}, 202)

    @app.post("/v1/streams/{tenant}/{namespace}/{name}/load")
    def run_loader(tenant: str, namespace: str, name: str, body: dict | None = None,
                   principal=Depends(auth)):
        force = bool((body or {}).get("force", True))
        loaded = platform.streams.run_loader_cycle(tenant, namespace, name, force_seal=force)
        return json_response({"loaded": loaded})

    # -- queries ------------------------------------------------------------------------

    @app.post("/v1/query")
    def run_query(body: dict, principal=Depends(auth)):
        columns, rows, record = platform.execute_sql(
            principal,
            body.get("sql", ""),
            warehouse=body.get("warehouse", "default"),
            force=bool(body.get("force", False)),
        )
        return json_response(
            {
                "columns": columns,
                "rows": [list(r) for r in rows],
                "query_id": record["query_id"],
                "status": record["status"],
                "duration_ms": record["duration_ms"],
                "rows_returned": record["rows_returned"],
                "scan_stats": record["scan_stats"],
            }
        )

    @app.get("/v1/history")
    def history(tenant: str | None = None, principal_ref: str | None = None,
                object: str | None = None, from_ts: str | None = None,
                to_ts: str | None = None, limit: int | None = None,
                principal=Depends(auth)):
        records = platform.gateway.query_history(
            caller=principal, tenant=tenant, principal_ref=principal_ref, obj=object,
            from_ts=from_ts, to_ts=to_ts, limit=limit,
        )
        return json_response(records)

    # -- lineage -------------------------------------------------------------------------

    @app.get("/v1/lineage")
    def lineage(object: str | None = None, from_ts: str | None = None,
                to_ts: str | None = None, direction: str = "downstream",
                depth: int = 5, principal=Depends(auth)):
        if object:
            graph = platform.lineage.closure(object, direction, max_depth=depth,
                                             from_ts=from_ts, to_ts=to_ts)
        else:
            graph = platform.lineage.union_window(from_ts, to_ts)
        return json_response(graph.to_dict())

    @app.get("/v1/lineage/stats")
    def lineage_stats(from_ts: str | None = None, to_ts: str | None = None,
                      principal=Depends(auth)):
        return json_response(platform.lineage.graph_stats(from_ts, to_ts))

    # -- transformer ------------------------------------------------------------------------

    @app.post("/v1/transform/infer")
    def transform_infer(body: dict, principal=Depends(auth)):
        qualified = body.get("table") or body.get("stream") or ""
        sample = int(body.get("sample", 1000))
        emit = body.get("emit", "schema-json")
        schema = platform.infer_stream_schema(principal, qualified, sample=sample)
        if emit == "schema-json":
            return json_response(schema.to_dict())
        if emit == "sql":
            from .inference import generate_flatten_sql

            generated = generate_flatten_sql(schema, qualified)
            return json_response({"root": generated.root, "children": generated.children})
        if emit == "views":
            created = platform.create_generated_views(
                principal, qualified, schema, force=bool(body.get("force", False))
            )
            return json_response({"views": created})
        raise MalformedPayload(f"emit must be schema-json|sql|views, got {emit!r}")

    # -- marketplace ---------------------------------------------------------------------------

    @app.post("/v1/products", status_code=201)
    def register_product(body: dict, principal=Depends(auth)):
        product = platform.marketplace.register_product(
            principal,
            body.get("address", ""),
            body.get("resources", []),
            support_channel=body.get("support_channel", ""),
            description=body.get("description", ""),
            business_objective=body.get("business_objective", ""),
            tags=body.get("tags", []),
            evaluate=bool(body.get("evaluate", True)),
        )
        return json_response(product, 201)

    @app.get("/v1/products")
    def list_products(tenant: str | None = None, principal=Depends(auth)):
        products = [
            p
            for p in platform.marketplace.list_products(tenant)
            if platform.marketplace._visible(p, principal.tenant)
        ]
        return json_response(products)

    @app.get("/v1/products/{address}")
    def get_product(address: str, principal=Depends(auth)):
        product = platform.marketplace.get_product(address)
        if not platform.marketplace._visible(product, principal.tenant):
            from .errors import AccessDenied

            raise AccessDenied(f"{principal.ref()} cannot see {address}")
        product["stability_history"] = platform.marketplace.stability_history(address)
        product["pii_findings"] = [
            f
            for f in platform.pii.list_findings()
            if f["table"] in product.get("resources", [])
        ]
        product["feedback"] = platform.marketplace.feedback_entries(address)
        return json_response(product)

    @app.post("/v1/products/{address}/evaluate")
    def evaluate_product(address: str, principal=Depends(auth)):
        from .errors import AccessDenied

        if not platform.access.check_access(principal, address, "MANAGE"):
            raise AccessDenied(f"{principal.ref()} does not manage {address}")
        return json_response(platform.marketplace.evaluate_stability(address))

    @app.get("/v1/catalog/search")
    def catalog_search(q: str = "", tenant: str | None = None,
                       stability_class: str | None = None, principal=Depends(auth)):
        entries = platform.marketplace.search(
            principal, q, tenant_filter=tenant, class_filter=stability_class
        )
        return json_response([e.to_dict() for e in entries])

    @app.post("/v1/products/{address}/feedback", status_code=201)
    def product_feedback(address: str, body: dict, principal=Depends(auth)):
        entry = platform.marketplace.record_feedback(
            principal, address, body.get("rating"), comment=body.get("comment", "")
        )
        return json_response(entry, 201)

    # -- advisor ---------------------------------------------------------------------------------

    @app.get("/v1/suggestions")
    def list_suggestions(tenant: str | None = None, state: str | None = None,
                         principal=Depends(auth)):
        return json_response(platform.advisor.list_suggestions(tenant=tenant, state=state))

    @app.post("/v1/suggestions/sweep")
    def sweep_suggestions(body: dict | None = None, principal=Depends(auth)):
        body = body or {}
        created = []
        if body.get("table"):
            suggestion = platform.advisor.recommend_clustering(
                body["table"], body.get("from_ts"), body.get("to_ts")
            )
            if suggestion:
                created.append(suggestion)
        else:
            created.extend(platform.advisor.detect_failsafe_overuse())
            for address, _rec in platform.catalog.list_objects(kind=None):
                if address.kind.value != "table":
                    continue
                try:
                    suggestion = platform.advisor.recommend_clustering(address.qualified())
                except MeshError:
                    continue
                if suggestion:
                    created.append(suggestion)
        return json_response({"created": created})

    @app.post("/v1/suggestions/{suggestion_id}/resolve")
    def resolve_suggestion(suggestion_id: str, body: dict, principal=Depends(auth)):
        return json_response(
            platform.advisor.resolve_suggestion(
                suggestion_id, body.get("decision", ""), principal
            )
        )

    # -- pii ----------------------------------------------------------------------------------------

    @app.post("/v1/pii/scan/{address}")
    def pii_scan(address: str, principal=Depends(auth)):
        from .errors import AccessDenied

        if not platform.access.check_access(principal, address, "MANAGE"):
            raise AccessDenied(f"{principal.ref()} does not manage {address}")
        return json_response(platform.pii.scan_table(address))

    @app.get("/v1/pii/findings")
    def pii_findings(tenant: str | None = None, state: str | None = None,
                     principal=Depends(auth)):
        return json_response(platform.pii.list_findings(tenant=tenant, state=state))

    @app.post("/v1/pii/findings/{finding_id}/resolve")
    def pii_resolve(finding_id: str, body: dict, principal=Depends(auth)):
        return json_response(
            platform.pii.resolve_finding(finding_id, body.get("state", ""), principal)
        )

    # -- access ---------------------------------------------------------------------------------------

    @app.post("/v1/groups", status_code=201)
    def create_group(body: dict, principal=Depends(auth)):
        return json_response(
            platform.access.create_group(
                body.get("tenant", principal.tenant), body.get("id", ""), principal
            ),
            201,
        )

    @app.get("/v1/groups")
    def list_groups(tenant: str | None = None, principal=Depends(auth)):
        return json_response(platform.access.list_groups(tenant))

    @app.post("/v1/groups/{tenant}/{group_id}/members")
    def add_member(tenant: str, group_id: str, body: dict, principal=Depends(auth)):
        return json_response(
            platform.access.add_member(
                tenant, group_id, body.get("member", ""), principal,
                admin=bool(body.get("admin", False)),
            )
        )

    @app.post("/v1/groups/{tenant}/{group_id}/grant")
    def grant(tenant: str, group_id: str, body: dict, principal=Depends(auth)):
        return json_response(
            platform.access.grant(
                tenant, group_id, body.get("resources", []), body.get("permissions", []),
                principal,
            )
        )

    @app.post("/v1/shares", status_code=201)
    def create_share(body: dict, principal=Depends(auth)):
        return json_response(
            platform.access.create_share(
                principal, body.get("consumer", ""), body.get("objects", [])
            ),
            201,
        )

    @app.get("/v1/shares")
    def list_shares(tenant: str | None = None, principal=Depends(auth)):
        return json_response(platform.access.list_shares(tenant))

    @app.post("/v1/shares/{share_id}/revoke")
    def revoke_share(share_id: str, principal=Depends(auth)):
        return json_response(platform.access.revoke_share(share_id, principal))

    @app.post("/v1/shares/{share_id}/verify")
    def verify_share(share_id: str, body: dict, principal=Depends(auth)):
        proposed = body.get("proposed", body)
        current_columns = None
        target = proposed.get("object", "")
        found = platform.catalog.try_resolve(target)
        if found is not None and found[0].kind.value == "table":
            table = platform.tables.get(target)
            current_columns = [(c.name, c.type) for c in table.columns]
        view_reads = None
        if "view_sql" in proposed:
            from .sql import extract_dependencies, parse

            stmt = parse(proposed["view_sql"])
            deps = extract_dependencies(stmt, platform.snapshot, found[0].tenant if found else principal.tenant)
            view_reads = set(deps.reads)
        verdict = platform.access.verify_share_compatibility(
            share_id, proposed, current_columns=current_columns, view_reads=view_reads
        )
        return json_response(verdict.to_dict())

    # -- inbox ----------------------------------------------------------------------------------

    @app.get("/v1/inbox")
    def inbox(tenant: str | None = None, principal=Depends(auth)):
        return json_response(platform.read_inbox(tenant or principal.tenant))

    # -- static UI ----------------------------------------------------------------------------------

    ui_dir = os.path.join(os.path.dirname(platform.config.data_dir), "frontend", "dist")
    for candidate in (
        os.environ.get("MESH_UI_DIR", ""),
        os.path.join(os.getcwd(), "frontend", "dist"),
        ui_dir,
    ):
        if candidate and os.path.isdir(candidate):
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=candidate, html=True), name="ui")
            break

    return app
