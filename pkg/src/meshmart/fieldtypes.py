"""Field type lattice used by schema inference, SQL casts, and share compatibility.

Join rules:
    BOTTOM is the identity; NULL is below every other type.
    INT joined with FLOAT widens to FLOAT; any other two distinct scalars
    join to STRING. A scalar joined with a composite (OBJECT/ARRAY), or
    OBJECT with ARRAY, is VARIANT. ARRAY joins elementwise. VARIANT absorbs
    everything.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TypeMismatch

SCALARS = ("BOOL", "INT", "FLOAT", "STRING")
_KINDS = ("BOTTOM", "NULL", "BOOL", "INT", "FLOAT", "STRING", "OBJECT", "ARRAY", "VARIANT")


@dataclass(frozen=True)
class FieldType:
    kind: str
    element: "FieldType | None" = None  # set iff kind == "ARRAY"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise TypeMismatch(f"unknown type kind: {self.kind}")
        if (self.kind == "ARRAY") != (self.element is not None):
            raise TypeMismatch("ARRAY types carry exactly one element type")

    def __str__(self) -> str:
        if self.kind == "ARRAY":
            return f"ARRAY<{self.element}>"
        return self.kind


BOTTOM = FieldType("BOTTOM")
NULL = FieldType("NULL")
BOOL = FieldType("BOOL")
INT = FieldType("INT")
FLOAT = FieldType("FLOAT")
STRING = FieldType("STRING")
OBJECT = FieldType("OBJECT")
VARIANT = FieldType("VARIANT")


def array_of(element: FieldType) -> FieldType:
    return FieldType("ARRAY", element)


def join(a: FieldType, b: FieldType) -> FieldType:
    if a == b:
        return a
    if a.kind == "BOTTOM":
        return b
    if b.kind == "BOTTOM":
        return a
    if a.kind == "NULL":
        return b
    if b.kind == "NULL":
        return a
    if a.kind == "VARIANT" or b.kind == "VARIANT":
        return VARIANT
    a_scalar = a.kind in SCALARS
    b_scalar = b.kind in SCALARS
    if a_scalar and b_scalar:
        if {a.kind, b.kind} == {"INT", "FLOAT"}:
            return FLOAT
        return STRING
    if a.kind == "ARRAY" and b.kind == "ARRAY":
        return array_of(join(a.element, b.element))
    if a.kind == "OBJECT" and b.kind == "OBJECT":
        return OBJECT
    # scalar vs composite, or OBJECT vs ARRAY
    return VARIANT


def le(a: FieldType, b: FieldType) -> bool:
    """Lattice order: a <= b iff joining a into b changes nothing (b is as wide)."""
    return join(a, b) == b


def scalar_type_of(value) -> FieldType:
    """Type of one observed variant value (never BOTTOM)."""
    if value is None:
        return NULL
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, float):
        return FLOAT
    if isinstance(value, str):
        return STRING
    if isinstance(value, dict):
        return OBJECT
    if isinstance(value, list):
        element = BOTTOM
        for item in value:
            element = join(element, scalar_type_of(item))
        return array_of(element)
    raise TypeMismatch(f"unsupported value type: {type(value).__name__}")


def parse_type(text: str) -> FieldType:
    """Parse the serialized form produced by str(FieldType), e.g. ARRAY<INT>."""
    text = text.strip().upper()
    if text.startswith("ARRAY<") and text.endswith(">"):
        return array_of(parse_type(text[6:-1]))
    if text in _KINDS:
        return FieldType(text)
    raise TypeMismatch(f"unknown type: {text}")


# Declarable column types for base tables (subset of the lattice).
COLUMN_TYPES = ("BOOL", "INT", "FLOAT", "STRING", "VARIANT")
