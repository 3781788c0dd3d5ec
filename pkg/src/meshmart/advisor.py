"""Usage-driven optimization advisor with a human accept/reject loop.

Nothing is applied automatically: a suggestion's side effect runs only on
an explicit accept by a principal holding MANAGE on the target. Rejections
suppress the (target, kind) pair for a cool-down window. Evidence is
reproducible: recomputing it from the sensing log for the stated window
yields identical counts.
"""

from __future__ import annotations

import threading

from .core import Catalog, Principal, SYS_PREFIX
from .errors import AccessDenied, NoSuchTable, NotPending
from .util import now_rfc3339, parse_rfc3339

SUGGESTION_PREFIX = f"{SYS_PREFIX}suggestion/"

EQ_WEIGHT = 1.0
RANGE_WEIGHT = 0.5


def _op_weight(op: str) -> float:
    return EQ_WEIGHT if op == "=" else RANGE_WEIGHT


class Advisor:
    def __init__(
        self,
        catalog: Catalog,
        table_store,
        gateway,
        access,
        top_share_threshold: float = 0.3,
        min_queries: int = 20,
        cooldown_days: int = 30,
        inbox_append=None,
    ):
        self.catalog = catalog
        self.table_store = table_store
        self.gateway = gateway
        self.access = access
        self.top_share_threshold = top_share_threshold
        self.min_queries = min_queries
        self.cooldown_days = cooldown_days
        self.inbox_append = inbox_append or (lambda tenant, doc: None)
        self._lock = threading.RLock()

    # -- bookkeeping ------------------------------------------------------------

    def list_suggestions(self, tenant: str | None = None, state: str | None = None) -> list[dict]:
        out = []
        for rec in self.catalog.store.items(SUGGESTION_PREFIX):
            doc = dict(rec.body)
            if tenant is not None and doc["target"].split(".")[0] != tenant:
                continue
            if state is not None and doc["state"] != state:
                continue
            out.append(doc)
        out.sort(key=lambda d: d["id"])
        return out

    def get_suggestion(self, suggestion_id: str) -> dict:
        rec = self.catalog.store.get(SUGGESTION_PREFIX + suggestion_id)
        if rec is None:
            raise NotPending(f"no such suggestion: {suggestion_id}")
        return dict(rec.body)

    def _blocked(self, target: str, kind: str) -> bool:
        """A pending twin exists, or a rejection is inside its cool-down."""
        now = parse_rfc3339(now_rfc3339())
        for doc in self.list_suggestions():
            if doc["target"] != target or doc["kind"] != kind:
                continue
            if doc["state"] == "pending":
                return True
            if doc["state"] == "rejected":
                resolved_at = doc.get("resolved_at")
                if resolved_at:
                    age_days = (now - parse_rfc3339(resolved_at)).total_seconds() / 86400.0
                    if age_days < self.cooldown_days:
                        return True
        return False

    def _new_suggestion(self, kind: str, target: str, evidence: dict, path: str | None = None) -> dict:
        with self._lock:
            seq = len(self.catalog.store.keys(SUGGESTION_PREFIX)) + 1
            doc = {
                "id": f"sug{seq:06d}",
                "kind": kind,
                "path": path,
                "target": target,
                "evidence": evidence,
                "state": "pending",
                "created_at": now_rfc3339(),
                "resolved_by": None,
                "resolved_at": None,
            }
            self.catalog.store.put(SUGGESTION_PREFIX + doc["id"], doc)
            self.inbox_append(target.split(".")[0], {"type": "suggestion", **doc})
            return doc

    # -- clustering recommendations ------------------------------------------------------

    def clustering_evidence(self, qualified: str, from_ts: str | None, to_ts: str | None) -> dict:
        """Tally pushed predicate stats per path over records reading the table."""
        query_count = 0
        tallies: dict[str, float] = {}
        predicate_queries: dict[str, int] = {}
        partitions_scanned: dict[str, list[int]] = {}
        for record in self.gateway.iter_records(from_ts, to_ts):
            deps = record.get("dependencies") or {}
            if qualified not in set(deps.get("reads", [])):
                continue
            query_count += 1
            scan_parts = None
            for scan in record.get("scan_stats", []):
                if scan.get("address") == qualified:
                    scan_parts = scan.get("partitions_scanned")
            paths_here = set()
            for pred in deps.get("predicates", []):
                if pred.get("address") != qualified:
                    continue
                path = pred["path"]
                op = pred["op"]
                weight = EQ_WEIGHT if op == "=" else (RANGE_WEIGHT if op != "IS NULL" else RANGE_WEIGHT)
                tallies[path] = tallies.get(path, 0.0) + weight
                paths_here.add(path)
            for path in paths_here:
                predicate_queries[path] = predicate_queries.get(path, 0) + 1
                if scan_parts is not None:
                    partitions_scanned.setdefault(path, []).append(scan_parts)
        total = sum(tallies.values())
        shares = {p: (w / total if total else 0.0) for p, w in tallies.items()}
        avg_scanned = {
            p: (sum(v) / len(v) if v else None) for p, v in partitions_scanned.items()
        }
        return {
            "window": {"from": from_ts, "to": to_ts},
            "query_count": query_count,
            "path_weights": tallies,
            "path_shares": shares,
            "path_query_counts": predicate_queries,
            "avg_partitions_scanned": avg_scanned,
        }

    def recommend_clustering(self, qualified: str, from_ts: str | None = None,
                             to_ts: str | None = None) -> dict | None:
        if not self.table_store.exists(_address_of(qualified)):
            raise NoSuchTable(f"no such table: {qualified}")
        table = self.table_store.get(qualified)
        evidence = self.clustering_evidence(qualified, from_ts, to_ts)
        if evidence["query_count"] < self.min_queries or not evidence["path_weights"]:
            return None
        top_path = sorted(
            evidence["path_weights"].items(), key=lambda kv: (-kv[1], kv[0])
        )[0][0]
        if evidence["path_shares"][top_path] < self.top_share_threshold:
            return None
        if table.cluster_key == top_path:
            return None
        if self._blocked(qualified, "ClusterKey"):
            return None
        return self._new_suggestion("ClusterKey", qualified, evidence, path=top_path)

    # -- failsafe overuse -------------------------------------------------------------------

    def detect_failsafe_overuse(self) -> list[dict]:
        """Derived tables (CTAS/INSERT-SELECT only writers) with retention on."""
        out = []
        writers: dict[str, list[dict]] = {}
        for record in self.gateway.iter_records():
            if record.get("status") != "success":
                continue
            deps = record.get("dependencies") or {}
            target = deps.get("writes")
            if not target or deps.get("write_mode") not in ("ctas", "insert"):
                continue
            writers.setdefault(target, []).append(
                {
                    "query_id": record["query_id"],
                    "mode": deps["write_mode"],
                    "reads": [r for r in deps.get("reads", [])],
                }
            )
        for address, rec in self.catalog.list_objects():
            body = rec.body
            if body.get("kind") != "table" or body.get("stream"):
                continue
            qualified = address.qualified()
            if not self.table_store.exists(address):
                continue
            table = self.table_store.get(qualified)
            if not table.retention_enabled:
                continue
            evidence_writes = writers.get(qualified, [])
            if not evidence_writes:
                continue
            if not all(
                w["reads"] and all(self.catalog.try_resolve(r) for r in w["reads"])
                for w in evidence_writes
            ):
                continue
            if self._blocked(qualified, "DisableFailsafe"):
                continue
            out.append(
                self._new_suggestion(
                    "DisableFailsafe",
                    qualified,
                    {
                        "derivation_proof": evidence_writes,
                        "window": {"from": None, "to": None},
                        "query_count": len(evidence_writes),
                    },
                )
            )
        return out

    # -- resolution ----------------------------------------------------------------------------

    def resolve_suggestion(self, suggestion_id: str, decision: str, principal: Principal) -> dict:
        if decision not in ("accept", "reject"):
            raise NotPending(f"decision must be accept or reject, got {decision!r}")
        with self._lock:
            doc = self.get_suggestion(suggestion_id)
            if doc["state"] != "pending":
                raise NotPending(f"suggestion {suggestion_id} is {doc['state']}")
            if not self.access.check_access(principal, doc["target"], "MANAGE"):
                raise AccessDenied(f"{principal.ref()} does not manage {doc['target']}")
            doc["resolved_by"] = principal.ref()
            doc["resolved_at"] = now_rfc3339()
            if decision == "reject":
                doc["state"] = "rejected"
            else:
                doc["state"] = "accepted"
                self.catalog.store.put(SUGGESTION_PREFIX + suggestion_id, doc)
                table = self.table_store.get(doc["target"])
                if doc["kind"] == "ClusterKey":
                    table.recluster(doc["path"])
                elif doc["kind"] == "DisableFailsafe":
                    table.set_retention(False)
                doc["state"] = "applied"
            self.catalog.store.put(SUGGESTION_PREFIX + suggestion_id, doc)
            self.inbox_append(doc["target"].split(".")[0], {"type": "resolution", **doc})
            return doc


def _address_of(qualified: str):
    from .core import parse_qualified

    return parse_qualified(qualified)
