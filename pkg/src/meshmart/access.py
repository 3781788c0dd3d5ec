"""Self-service authorization: access groups, grants, zero-copy shares,
and proactive share-compatibility verification.

check_access is the single truth for permissions:
    allow iff caller is tenant admin of the object's tenant,
          or a group of the object's tenant grants (member, resource, perm),
          or perm is READ and an active share covers the object for the
          caller's tenant.
Shares move no data: consumers resolve producer blocks by reference.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .core import Catalog, ObjectKind, Principal, SYS_PREFIX, make_address
from .errors import (
    AccessDenied,
    InvalidIdentifier,
    NotFound,
    UnknownResource,
    UnknownShare,
)
from .fieldtypes import le, parse_type
from .util import now_rfc3339

PERMISSIONS = ("READ", "WRITE", "MANAGE")


def group_key(tenant: str, group_id: str) -> str:
    return f"{SYS_PREFIX}group/{tenant}/{group_id}"


def share_key(share_id: str) -> str:
    return f"{SYS_PREFIX}share/{share_id}"


@dataclass
class CompatibilityVerdict:
    share: str
    verdict: str  # compatible | breaking
    violations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"share": self.share, "verdict": self.verdict, "violations": self.violations}


class AccessManager:
    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self._lock = threading.RLock()

    # -- groups ------------------------------------------------------------------

    def create_group(self, tenant: str, group_id: str, caller: Principal) -> dict:
        if caller.tenant != tenant and not self._is_tenant_admin(caller, tenant):
            raise AccessDenied(f"{caller.ref()} cannot create groups in {tenant}")
        with self._lock:
            key = group_key(tenant, group_id)
            if self.catalog.store.get(key) is not None:
                raise InvalidIdentifier(f"group exists: {tenant}/{group_id}")
            doc = {
                "id": group_id,
                "tenant": tenant,
                "members": [caller.ref()],
                "admins": [caller.ref()],
                "resources": [],
                "permissions": [],
                "created_at": now_rfc3339(),
            }
            self.catalog.store.put(key, doc)
            return doc

    def get_group(self, tenant: str, group_id: str) -> dict:
        rec = self.catalog.store.get(group_key(tenant, group_id))
        if rec is None:
            raise NotFound(f"no such group: {tenant}/{group_id}")
        return dict(rec.body)

    def list_groups(self, tenant: str | None = None) -> list[dict]:
        prefix = f"{SYS_PREFIX}group/{tenant}/" if tenant else f"{SYS_PREFIX}group/"
        return [dict(rec.body) for rec in self.catalog.store.items(prefix)]

    def _require_group_admin(self, group: dict, caller: Principal) -> None:
        if caller.ref() not in group["admins"] and not self._is_tenant_admin(caller, group["tenant"]):
            raise AccessDenied(f"{caller.ref()} is not an admin of group {group['id']}")

    def add_member(self, tenant: str, group_id: str, member_ref: str, caller: Principal,
                   admin: bool = False) -> dict:
        """Members may live in any tenant (machine principals across PDWs)."""
        member_tenant, _, member_id = member_ref.partition("/")
        self.catalog.get_principal(member_tenant, member_id)  # must exist
        with self._lock:
            group = self.get_group(tenant, group_id)
            self._require_group_admin(group, caller)
            if member_ref not in group["members"]:
                group["members"].append(member_ref)
            if admin and member_ref not in group["admins"]:
                group["admins"].append(member_ref)
            self.catalog.store.put(group_key(tenant, group_id), group)
            return group

    def grant(self, tenant: str, group_id: str, resources: list[str], permissions: list[str],
              caller: Principal) -> dict:
        """Grant permissions on resources (addresses or `tenant.ns.*` globs).

        Caller must be a group admin and hold MANAGE on every resource; all
        resources must live in the group's tenant (cross-tenant access goes
        through shares, never grants).
        """
        for perm in permissions:
            if perm not in PERMISSIONS:
                raise InvalidIdentifier(f"unknown permission: {perm}")
        with self._lock:
            group = self.get_group(tenant, group_id)
            self._require_group_admin(group, caller)
            for resource in resources:
                r_tenant = resource.split(".")[0]
                if r_tenant != group["tenant"]:
                    raise AccessDenied(
                        f"resource {resource} is outside group tenant {group['tenant']}; use a share"
                    )
                if not resource.endswith(".*"):
                    if self.catalog.try_resolve(resource) is None:
                        raise UnknownResource(f"no such resource: {resource}")
                if not self.check_access(caller, resource, "MANAGE", allow_glob=True):
                    raise AccessDenied(f"{caller.ref()} lacks MANAGE on {resource}")
                if resource not in group["resources"]:
                    group["resources"].append(resource)
            for perm in permissions:
                if perm not in group["permissions"]:
                    group["permissions"].append(perm)
            self.catalog.store.put(group_key(tenant, group_id), group)
            return group

    # -- permission checks ------------------------------------------------------------

    def _is_tenant_admin(self, principal: Principal, tenant: str) -> bool:
        return principal.admin and principal.tenant == tenant

    @staticmethod
    def _covers(resource_entry: str, qualified: str) -> bool:
        if resource_entry.endswith(".*"):
            return qualified.startswith(resource_entry[:-1])
        return resource_entry == qualified

    def check_access(self, principal: Principal, qualified: str, permission: str,
                     allow_glob: bool = False) -> bool:
        if permission not in PERMISSIONS:
            return False
        if qualified.endswith(".*") and not allow_glob:
            return False
        object_tenant = qualified.split(".")[0]
        if self._is_tenant_admin(principal, object_tenant):
            return True
        ref = principal.ref()
        for group in self.list_groups(object_tenant):
            if ref not in group["members"]:
                continue
            if permission not in group["permissions"]:
                continue
            if any(self._covers(entry, qualified) for entry in group["resources"]):
                return True
        if permission == "READ" and object_tenant != principal.tenant:
            if self.share_covering(qualified, principal.tenant) is not None:
                return True
        return False

    # -- shares ---------------------------------------------------------------------------

    def create_share(self, caller: Principal, consumer_tenant: str, objects: list[str]) -> dict:
        self.catalog.get_tenant(consumer_tenant)
        if not caller.admin:
            raise AccessDenied("only producer tenant admins create shares")
        producer = caller.tenant
        resolved_objects = []
        for qualified in objects:
            found = self.catalog.try_resolve(qualified)
            if found is None:
                raise UnknownResource(f"no such object: {qualified}")
            address, _rec = found
            if address.tenant != producer:
                raise AccessDenied(f"{qualified} is not in producer tenant {producer}")
            if address.kind not in (ObjectKind.TABLE, ObjectKind.VIEW):
                raise UnknownResource(f"only tables/views are shareable: {qualified}")
            resolved_objects.append(qualified)
        with self._lock:
            seq = len(self.catalog.store.keys(f"{SYS_PREFIX}share/")) + 1
            share_id = f"sh{seq:05d}"
            doc = {
                "id": share_id,
                "producer": producer,
                "consumer": consumer_tenant,
                "objects": sorted(resolved_objects),
                "read_only": True,
                "state": "active",
                "created_at": now_rfc3339(),
                "created_by": caller.ref(),
            }
            self.catalog.store.put(share_key(share_id), doc)
            self.catalog.register_object(
                make_address(producer, "shares", share_id, ObjectKind.SHARE),
                {"share_id": share_id, "consumer": consumer_tenant, "objects": doc["objects"]},
            )
            return doc

    def get_share(self, share_id: str) -> dict:
        rec = self.catalog.store.get(share_key(share_id))
        if rec is None:
            raise UnknownShare(f"no such share: {share_id}")
        return dict(rec.body)

    def list_shares(self, tenant: str | None = None) -> list[dict]:
        out = []
        for rec in self.catalog.store.items(f"{SYS_PREFIX}share/"):
            doc = rec.body
            if tenant is None or doc["producer"] == tenant or doc["consumer"] == tenant:
                out.append(dict(doc))
        return out

    def revoke_share(self, share_id: str, caller: Principal) -> dict:
        with self._lock:
            share = self.get_share(share_id)
            if not self._is_tenant_admin(caller, share["producer"]):
                raise AccessDenied("only producer tenant admins revoke shares")
            share["state"] = "revoked"
            share["revoked_at"] = now_rfc3339()
            self.catalog.store.put(share_key(share_id), share)
            return share

    def share_covering(self, qualified: str, consumer_tenant: str) -> str | None:
        """Address of an active share granting consumer_tenant READ on qualified."""
        for share in self.list_shares():
            if share["state"] != "active" or share["consumer"] != consumer_tenant:
                continue
            if qualified in share["objects"]:
                return f"{share['producer']}.shares.{share['id']}"
        return None

    def share_address(self, share: dict) -> str:
        return f"{share['producer']}.shares.{share['id']}"

    # -- compatibility verification ----------------------------------------------------------

    def verify_share_compatibility(self, share_id: str, proposed: dict,
                                   current_columns: list[tuple[str, str]] | None = None,
                                   view_reads: set[str] | None = None) -> CompatibilityVerdict:
        """Verdict on a proposed change to a shared object.

        proposed: {"object": qualified, "new_columns": [{name, type}]} for
        tables (optionally {"renames": {old: new}}), or {"object", "view_sql"}
        with view_reads precomputed by the caller for view redefinitions.
        """
        share = self.get_share(share_id)
        target = proposed.get("object")
        if target not in share["objects"]:
            raise UnknownResource(f"{target} is not covered by share {share_id}")
        violations: list[dict] = []
        renames = proposed.get("renames") or {}
        for old_name, new_name in renames.items():
            violations.append(
                {"kind": "renamed_column", "column": old_name, "renamed_to": new_name}
            )
        if "new_columns" in proposed and current_columns is not None:
            new_cols = {c["name"]: c["type"].upper() for c in proposed["new_columns"]}
            for name, old_type in current_columns:
                if name in renames:
                    continue  # already reported as a rename
                if name not in new_cols:
                    violations.append({"kind": "dropped_column", "column": name})
                    continue
                old_ft, new_ft = parse_type(old_type), parse_type(new_cols[name])
                if not le(old_ft, new_ft):
                    violations.append(
                        {
                            "kind": "type_narrowed",
                            "column": name,
                            "from": str(old_ft),
                            "to": str(new_ft),
                        }
                    )
        if view_reads is not None:
            shared = set(share["objects"])
            for read in sorted(view_reads):
                if read != target and read not in shared and read.split(".")[0] == share["producer"]:
                    violations.append({"kind": "unshared_reference", "object": read})
        verdict = "breaking" if violations else "compatible"
        return CompatibilityVerdict(share=share_id, verdict=verdict, violations=violations)

    def shares_covering_object(self, qualified: str) -> list[dict]:
        return [
            share
            for share in self.list_shares()
            if share["state"] == "active" and qualified in share["objects"]
        ]
