"""Data-product registry, automated stability classification, and
usage/feedback-ranked catalog search.

The class rule table (config-overridable in spirit, documented here):
    all four categories pass                      -> Stable
    OwnershipSupport and Addressability pass      -> Investigable
    anything else                                 -> Internal

Search score = text_match * class_boost * (1 + log(1 + usage_30d)) + mean
rating, deterministic tie-break by address. text_match per lowercased
query token: +2.0 name substring, +1.0 exact tag, +0.5 description or
objective substring; empty query scores 1.0; zero match excludes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from datetime import timedelta

from .core import Catalog, ObjectKind, Principal, SYS_PREFIX, parse_qualified
from .errors import (
    AccessDenied,
    DuplicateObject,
    EmptyResources,
    NotFound,
    RatingOutOfRange,
)
from .util import now_rfc3339, parse_rfc3339, to_rfc3339

CLASS_BOOST = {"Stable": 2.0, "Investigable": 1.0, "Internal": 0.3}
CATEGORIES = (
    "OwnershipSupport",
    "NamingDescriptionObjective",
    "ReadOptimizedAccess",
    "Addressability",
)


def classify(passed: dict[str, bool]) -> str:
    """Pure rule table from category pass/fail to stability class."""
    if all(passed.get(c, False) for c in CATEGORIES):
        return "Stable"
    if passed.get("OwnershipSupport", False) and passed.get("Addressability", False):
        return "Investigable"
    return "Internal"


def stability_key(qualified: str) -> str:
    return f"{SYS_PREFIX}stability/{qualified}"


def feedback_key(qualified: str, principal_ref: str) -> str:
    return f"{SYS_PREFIX}feedback/{qualified}/{principal_ref}"


@dataclass
class SearchEntry:
    address: str
    score: float
    stability_class: str
    text_match: float
    usage: int
    rating: float | None
    description: str
    tags: list[str]

    def to_dict(self) -> dict:
        return {
            "address": self.address,
            "score": round(self.score, 6),
            "class": self.stability_class,
            "text_match": self.text_match,
            "usage": self.usage,
            "rating": self.rating,
            "description": self.description,
            "tags": self.tags,
        }


class Marketplace:
    def __init__(
        self,
        catalog: Catalog,
        table_store,
        access,
        gateway,
        min_description_chars: int = 80,
        preview_budget_ms: float = 2000.0,
        usage_window_days: int = 30,
        preview_rows: int = 100,
    ):
        self.catalog = catalog
        self.table_store = table_store
        self.access = access
        self.gateway = gateway
        self.min_description_chars = min_description_chars
        self.preview_budget_ms = preview_budget_ms
        self.usage_window_days = usage_window_days
        self.preview_rows = preview_rows
        self._lock = threading.RLock()

    # -- registration ---------------------------------------------------------------

    def register_product(
        self,
        caller: Principal,
        qualified: str,
        resources: list[str],
        support_channel: str = "",
        description: str = "",
        business_objective: str = "",
        tags: list[str] | None = None,
        evaluate: bool = True,
    ) -> dict:
        if not resources:
            raise EmptyResources("a product bundles at least one resource")
        address = parse_qualified(qualified, ObjectKind.PRODUCT)
        if address.tenant != caller.tenant:
            raise AccessDenied("products are registered in the owner's tenant")
        for resource in resources:
            found = self.catalog.try_resolve(resource)
            if found is None:
                raise NotFound(f"no such resource: {resource}")
            r_addr, _rec = found
            if r_addr.tenant != address.tenant:
                share = self.access.share_covering(resource, address.tenant)
                if share is None:
                    raise AccessDenied(
                        f"resource {resource} is in another tenant and not shared"
                    )
            elif not self.access.check_access(caller, resource, "MANAGE"):
                raise AccessDenied(f"{caller.ref()} does not manage {resource}")
        body = {
            "resources": sorted(resources),
            "owner": caller.ref(),
            "support_channel": support_channel,
            "description": description,
            "business_objective": business_objective,
            "tags": sorted(tags or []),
            "created_at": now_rfc3339(),
            "class": "Internal",  # until first evaluation
        }
        try:
            self.catalog.register_object(address, body)
        except DuplicateObject:
            raise DuplicateObject(f"product address in use: {qualified}")
        if evaluate:
            self.evaluate_stability(qualified)
        return self.get_product(qualified)

    def get_product(self, qualified: str) -> dict:
        address, rec = self.catalog.resolve(qualified)
        if address.kind != ObjectKind.PRODUCT:
            raise NotFound(f"not a product: {qualified}")
        doc = dict(rec.body)
        doc["address"] = qualified
        doc["rating"] = self.mean_rating(qualified)
        return doc

    def list_products(self, tenant: str | None = None) -> list[dict]:
        out = []
        for address, _rec in self.catalog.list_objects(tenant=tenant, kind=ObjectKind.PRODUCT):
            out.append(self.get_product(address.qualified()))
        return out

    # -- stability evaluation -----------------------------------------------------------

    def evaluate_stability(self, qualified: str) -> dict:
        """Run all checks; classification derives solely from the rule table."""
        with self._lock:
            address, rec = self.catalog.resolve(qualified)
            body = rec.body
            attributes = []

            owner = body.get("owner") or ""
            support = body.get("support_channel") or ""
            owner_exists = False
            if owner:
                tenant, _, pid = owner.partition("/")
                try:
                    self.catalog.get_principal(tenant, pid)
                    owner_exists = True
                except NotFound:
                    owner_exists = False
            ownership = owner_exists and bool(support.strip())
            attributes.append(
                {
                    "category": "OwnershipSupport",
                    "check": "owner_resolves_and_support_channel_set",
                    "passed": ownership,
                    "evidence": f"owner={owner or '<none>'} support_channel={'set' if support.strip() else 'empty'}",
                }
            )

            description = body.get("description") or ""
            objective = body.get("business_objective") or ""
            name = address.name
            naming = (
                len(description) >= self.min_description_chars
                and bool(objective.strip())
                and not name.startswith(("tmp_", "test_"))
            )
            attributes.append(
                {
                    "category": "NamingDescriptionObjective",
                    "check": f"description>={self.min_description_chars}ch, objective set, no tmp_/test_ prefix",
                    "passed": naming,
                    "evidence": f"description_chars={len(description)} objective={'set' if objective.strip() else 'empty'} name={name}",
                }
            )

            read_optimized = True
            read_evidence = []
            for resource in body.get("resources", []):
                found = self.catalog.try_resolve(resource)
                if found is None:
                    read_evidence.append(f"{resource}: unresolved")
                    read_optimized = False
                    continue
                r_addr, _r = found
                if r_addr.kind != ObjectKind.TABLE:
                    read_evidence.append(f"{resource}: view (preview n/a)")
                    continue
                table = self.table_store.get(resource)
                _rows, _stats, elapsed_ms = table.sample_preview(self.preview_rows)
                within = elapsed_ms <= self.preview_budget_ms
                read_evidence.append(f"{resource}: preview {elapsed_ms:.1f}ms")
                if not within:
                    read_optimized = False
                if self.access.shares_covering_object(resource) and not table.cluster_key:
                    read_evidence.append(f"{resource}: shared cross-tenant without cluster_key")
                    read_optimized = False
            attributes.append(
                {
                    "category": "ReadOptimizedAccess",
                    "check": f"preview<={self.preview_budget_ms:.0f}ms, cluster_key when shared",
                    "passed": read_optimized,
                    "evidence": "; ".join(read_evidence) or "no resources",
                }
            )

            unresolved = [r for r in body.get("resources", []) if self.catalog.try_resolve(r) is None]
            addressable = not unresolved
            attributes.append(
                {
                    "category": "Addressability",
                    "check": "every resource address resolves uniquely",
                    "passed": addressable,
                    "evidence": "all resolve" if addressable else f"unresolved: {unresolved}",
                }
            )

            passed = {a["category"]: a["passed"] for a in attributes}
            stability_class = classify(passed)
            report = {
                "product": qualified,
                "attributes": attributes,
                "class": stability_class,
                "evaluated_at": now_rfc3339(),
            }
            history_rec = self.catalog.store.get(stability_key(qualified))
            history = history_rec.body["history"] if history_rec else []
            history.append(report)
            self.catalog.store.put(stability_key(qualified), {"history": history})
            self.catalog.update_object(address, lambda doc: {**doc, "class": stability_class})
            return report

    def stability_history(self, qualified: str) -> list[dict]:
        rec = self.catalog.store.get(stability_key(qualified))
        return list(rec.body["history"]) if rec else []

    # -- feedback ---------------------------------------------------------------------------

    def record_feedback(self, caller: Principal, qualified: str, rating: int,
                        comment: str = "") -> dict:
        if not isinstance(rating, int) or not (1 <= rating <= 5):
            raise RatingOutOfRange(f"rating must be an integer 1..5, got {rating!r}")
        product = self.get_product(qualified)
        if not self._visible(product, caller.tenant):
            raise AccessDenied(f"{caller.ref()} cannot see {qualified}")
        entry = {
            "product": qualified,
            "principal": caller.ref(),
            "rating": rating,
            "comment": comment,
            "at": now_rfc3339(),
        }
        self.catalog.store.put(feedback_key(qualified, caller.ref()), entry)
        return entry

    def feedback_entries(self, qualified: str) -> list[dict]:
        prefix = f"{SYS_PREFIX}feedback/{qualified}/"
        return [dict(rec.body) for rec in self.catalog.store.items(prefix)]

    def mean_rating(self, qualified: str) -> float | None:
        entries = self.feedback_entries(qualified)
        if not entries:
            return None
        return sum(e["rating"] for e in entries) / len(entries)

    # -- search ------------------------------------------------------------------------------

    def _visible(self, product: dict, tenant: str) -> bool:
        product_tenant = product["address"].split(".")[0]
        if product_tenant == tenant:
            return True
        return any(
            self.access.share_covering(resource, tenant) is not None
            for resource in product.get("resources", [])
        )

    def text_match(self, product: dict, query: str) -> float:
        tokens = [t for t in query.lower().split() if t]
        if not tokens:
            return 1.0
        name = product["address"].split(".")[-1]
        description = (product.get("description") or "").lower()
        objective = (product.get("business_objective") or "").lower()
        tags = [t.lower() for t in product.get("tags", [])]
        score = 0.0
        for token in tokens:
            if token in name:
                score += 2.0
            if token in tags:
                score += 1.0
            if token in description or token in objective:
                score += 0.5
        return score

    def usage_30d(self, product: dict, now: str | None = None) -> int:
        cutoff_dt = parse_rfc3339(now or now_rfc3339()) - timedelta(days=self.usage_window_days)
        cutoff = to_rfc3339(cutoff_dt)
        return sum(
            self.gateway.usage_count(resource, cutoff)
            for resource in product.get("resources", [])
        )

    def score(self, product: dict, query: str, now: str | None = None) -> float | None:
        text = self.text_match(product, query)
        if text == 0.0:
            return None
        boost = CLASS_BOOST[product.get("class", "Internal")]
        usage = self.usage_30d(product, now)
        rating = self.mean_rating(product["address"]) or 0.0
        return text * boost * (1.0 + math.log(1.0 + usage)) + rating

    def search(self, caller: Principal, query: str = "", tenant_filter: str | None = None,
               class_filter: str | None = None, now: str | None = None) -> list[SearchEntry]:
        out: list[SearchEntry] = []
        for product in self.list_products(tenant_filter):
            if not self._visible(product, caller.tenant):
                continue
            if class_filter and product.get("class") != class_filter:
                continue
            total = self.score(product, query, now)
            if total is None:
                continue
            out.append(
                SearchEntry(
                    address=product["address"],
                    score=total,
                    stability_class=product.get("class", "Internal"),
                    text_match=self.text_match(product, query),
                    usage=self.usage_30d(product, now),
                    rating=self.mean_rating(product["address"]),
                    description=product.get("description", ""),
                    tags=product.get("tags", []),
                )
            )
        out.sort(key=lambda e: (-e.score, e.address))
        return out
