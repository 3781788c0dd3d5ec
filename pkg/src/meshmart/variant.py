"""Variant values: the JSON-like trees every ingested row and payload is made of.

A variant is plain Python data restricted to: None, bool, int (64-bit),
float (finite), str, list of variants, dict of str -> variant. Validation
happens at the platform boundary (ingest, append); everything downstream
may assume a valid tree.
"""

from __future__ import annotations

import math
from typing import Any, Iterator

from .errors import PayloadTooDeep, TypeMismatch

Variant = Any  # None | bool | int | float | str | list | dict

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
DEFAULT_MAX_DEPTH = 64

# Rank used only to make ORDER BY deterministic across mixed types.
_SORT_RANK = {"null": 0, "bool": 1, "num": 2, "str": 3, "list": 4, "dict": 5}


def validate_variant(value: Variant, max_depth: int = DEFAULT_MAX_DEPTH) -> None:
    """Reject values that may not exist at rest. Raises TypeMismatch / PayloadTooDeep."""
    _validate(value, max_depth, 0)


def _validate(value: Variant, max_depth: int, depth: int) -> None:
    if depth > max_depth:
        raise PayloadTooDeep(f"nesting depth exceeds limit of {max_depth}")
    if value is None or isinstance(value, bool) or isinstance(value, str):
        return
    if isinstance(value, int):
        if not (INT64_MIN <= value <= INT64_MAX):
            raise TypeMismatch(f"integer out of 64-bit range: {value}")
        return
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise TypeMismatch("NaN/Inf floats are rejected at rest")
        return
    if isinstance(value, list):
        for item in value:
            _validate(item, max_depth, depth + 1)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeMismatch(f"object keys must be strings, got {type(key).__name__}")
            _validate(item, max_depth, depth + 1)
        return
    raise TypeMismatch(f"unsupported value type: {type(value).__name__}")


def variant_get(value: Variant, path: str) -> Variant:
    """Resolve a dotted key path inside a variant; missing paths yield None.

    Path segments address object keys only (array elements are reached via
    FLATTEN, not paths). Keys containing '.' are not addressable this way.
    """
    current = value
    for segment in path.split("."):
        if not isinstance(current, dict):
            return None
        current = current.get(segment)
    return current


def type_class(value: Variant) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "num"
    if isinstance(value, str):
        return "str"
    if isinstance(value, list):
        return "list"
    return "dict"


def variant_compare(a: Variant, b: Variant) -> int | None:
    """Three-valued comparison: -1/0/1, or None when incomparable or either is null.

    Numerics widen (int vs float compares numerically); strings compare
    bytewise; bools compare as False < True. Cross-class and composite
    comparisons are incomparable.
    """
    if a is None or b is None:
        return None
    ca, cb = type_class(a), type_class(b)
    if ca != cb or ca in ("list", "dict"):
        return None
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def sort_key(value: Variant):
    """Total order for deterministic sorting: nulls first, then by type class."""
    cls = type_class(value)
    rank = _SORT_RANK[cls]
    if cls == "null":
        return (rank, 0)
    if cls == "bool":
        return (rank, int(value))
    if cls in ("list", "dict"):
        from .util import dumps_canonical

        return (rank, dumps_canonical(value))
    return (rank, value)


def walk_scalars(value: Variant, prefix: str = "") -> Iterator[tuple[str, Variant]]:
    """Yield (dotted path, scalar) pairs for every scalar leaf under object keys."""
    if isinstance(value, dict):
        for key, item in value.items():
            path = f"{prefix}.{key}" if prefix else key
            yield from walk_scalars(item, path)
    elif not isinstance(value, list):
        yield (prefix, value)
