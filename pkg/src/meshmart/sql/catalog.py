"""Catalog snapshot protocol the SQL frontend plans against.

The platform provides the concrete implementation; the frontend only needs
name resolution to tables/views (with share hops recorded) and column
lists. Snapshots are immutable for the duration of one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from ..errors import MalformedAddress


@dataclass(frozen=True)
class ResolvedObject:
    address: str  # qualified address of the physical/logical object
    kind: str  # table | view
    columns: tuple[str, ...] = ()
    view_sql: str | None = None  # SQL-text views
    native: dict | None = None  # engine-defined views (dedup / latest-version)
    via_share: str | None = None  # share address when reached through a share
    tenant: str = ""


class CatalogSnapshot(Protocol):
    def lookup(self, parts: tuple[str, ...], session_tenant: str) -> ResolvedObject | None:
        """Resolve 2-4 part names; session-relative first, then explicit tenant."""
        ...


def resolve_write_target(parts: tuple[str, ...], session_tenant: str,
                         catalog: "CatalogSnapshot | None" = None) -> str:
    """Qualified address for a write target.

    An existing object (session-relative or explicitly qualified) wins, so
    INSERT/DROP aimed at a foreign object resolve to it and fail the write
    access check rather than inventing a local name. New targets parse
    session-relative."""
    if catalog is not None:
        resolved = catalog.lookup(parts, session_tenant)
        if resolved is not None:
            return resolved.address
    if len(parts) == 2:
        return f"{session_tenant}.{parts[0]}.{parts[1]}"
    if len(parts) == 3:
        if parts[0] == session_tenant:
            return f"{session_tenant}.{parts[1]}.{parts[2]}"
        return f"{session_tenant}.{parts[0]}.{parts[1]}.{parts[2]}"
    if len(parts) == 4:
        return ".".join(parts)
    raise MalformedAddress(f"write target must have 2-4 segments: {'.'.join(parts)}")
