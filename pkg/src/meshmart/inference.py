"""Schema-on-read: infer relational schemas from document samples.

Inference walks every document, joins observed types per key path over the
type lattice, and tracks presence counts per relation so nullability falls
out as seen < rows. Array paths whose global element type is OBJECT become
child relations (one per path, chained through nested arrays); any other
array stays a column in its parent relation, emitted uncast.

Incremental inference holds because schemas carry enough counts to merge:
merge(infer(D1), infer(D2)) == infer(D1 + D2), including column names when
the union is a concatenation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DepthLimitExceeded, NotAnObject
from .fieldtypes import BOTTOM, OBJECT, FieldType, join, parse_type, scalar_type_of

DEFAULT_MAX_DEPTH = 64


class _ArrayMarker:
    """Path segment marking descent into array elements."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "[]"


ARRAY = _ArrayMarker()

Path = tuple  # tuple[str | _ArrayMarker, ...]


def display_path(path: Path) -> str:
    """Human form: a.b[].c ; consecutive markers render as m[][]."""
    parts: list[str] = []
    for seg in path:
        if isinstance(seg, _ArrayMarker):
            if parts:
                parts[-1] += "[]"
            else:
                parts.append("[]")
        else:
            parts.append(seg)
    return ".".join(parts)


def encode_path(path: Path) -> list:
    return [{"k": seg} if not isinstance(seg, _ArrayMarker) else "[]" for seg in path]


def decode_path(doc: list) -> Path:
    return tuple(ARRAY if seg == "[]" else seg["k"] for seg in doc)


@dataclass
class FieldDescriptor:
    path: Path
    type: FieldType
    nullable: bool
    column_name: str | None
    seen_count: int

    def to_dict(self) -> dict:
        return {
            "path": encode_path(self.path),
            "display_path": display_path(self.path),
            "type": str(self.type),
            "nullable": self.nullable,
            "column_name": self.column_name,
            "seen_count": self.seen_count,
        }


@dataclass
class InferredSchema:
    doc_count: int
    # insertion order == first-seen order; drives deterministic column naming
    fields: dict[Path, FieldDescriptor] = field(default_factory=dict)
    # rows observed per ARRAY-terminated path, valid relation or not
    array_rows: dict[Path, int] = field(default_factory=dict)
    relations: list[Path] = field(default_factory=list)  # () is the root

    def relation_of(self, path: Path) -> Path:
        for i in range(len(path), 0, -1):
            if isinstance(path[i - 1], _ArrayMarker):
                return path[:i]
        return ()

    def relation_rows(self, relation: Path) -> int:
        if relation == ():
            return self.doc_count
        return self.array_rows.get(relation, 0)

    def fields_of(self, relation: Path) -> list[FieldDescriptor]:
        return [d for p, d in self.fields.items() if self.relation_of(p) == relation]

    def columns_of(self, relation: Path) -> list[FieldDescriptor]:
        return [d for d in self.fields_of(relation) if d.column_name is not None]

    def to_dict(self) -> dict:
        return {
            "format": "meshmart-schema",
            "format_version": 1,
            "doc_count": self.doc_count,
            "relations": [
                {
                    "path": encode_path(rel),
                    "display_path": display_path(rel) or "<root>",
                    "rows": self.relation_rows(rel),
                    "fields": [d.to_dict() for d in self.fields_of(rel)],
                }
                for rel in self.relations
            ],
            "array_rows": [
                {"path": encode_path(p), "rows": n} for p, n in self.array_rows.items()
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "InferredSchema":
        schema = cls(doc_count=doc["doc_count"])
        for rel_doc in doc["relations"]:
            rel = decode_path(rel_doc["path"])
            schema.relations.append(rel)
            for fd in rel_doc["fields"]:
                path = decode_path(fd["path"])
                schema.fields[path] = FieldDescriptor(
                    path=path,
                    type=parse_type(fd["type"]),
                    nullable=fd["nullable"],
                    column_name=fd["column_name"],
                    seen_count=fd["seen_count"],
                )
        for entry in doc.get("array_rows", []):
            schema.array_rows[decode_path(entry["path"])] = entry["rows"]
        return schema


class _Collector:
    """Raw traversal state before relation pruning and naming."""

    def __init__(self):
        self.types: dict[Path, FieldType] = {}
        self.seen: dict[Path, int] = {}
        self.array_rows: dict[Path, int] = {}

    def observe(self, path: Path, value) -> None:
        self.types[path] = join(self.types.get(path, BOTTOM), scalar_type_of(value))
        if path not in self.seen:
            self.seen[path] = 0
        if value is not None:
            self.seen[path] += 1

    def walk(self, path: Path, value, depth: int, max_depth: int) -> None:
        if depth > max_depth:
            raise DepthLimitExceeded(f"document nesting exceeds limit of {max_depth}")
        if isinstance(value, dict):
            for key, item in value.items():
                child = path + (key,)
                self.observe(child, item)
                self.walk(child, item, depth + 1, max_depth)
        elif isinstance(value, list):
            arr = path + (ARRAY,)
            self.array_rows[arr] = self.array_rows.get(arr, 0) + len(value)
            for item in value:
                if isinstance(item, dict):
                    for key, sub in item.items():
                        child = arr + (key,)
                        self.observe(child, sub)
                        self.walk(child, sub, depth + 2, max_depth)
                elif isinstance(item, list):
                    self.walk(arr, item, depth + 1, max_depth)


def infer_schema(documents, max_depth: int = DEFAULT_MAX_DEPTH) -> InferredSchema:
    """Infer a schema from an iterable of document objects."""
    collector = _Collector()
    count = 0
    for doc in documents:
        if not isinstance(doc, dict):
            raise NotAnObject(f"documents must be objects, got {type(doc).__name__}")
        count += 1
        collector.walk((), doc, 0, max_depth)
    return _build(collector.types, collector.seen, collector.array_rows, count)


def _unwrap(ftype: FieldType, levels: int) -> FieldType | None:
    for _ in range(levels):
        if ftype.kind != "ARRAY":
            return None
        ftype = ftype.element
    return ftype


def _enclosing_relation(path: Path) -> Path:
    for i in range(len(path), 0, -1):
        if isinstance(path[i - 1], _ArrayMarker):
            return path[:i]
    return ()


def _valid_relations(types: dict[Path, FieldType], array_rows: dict[Path, int]) -> set[Path]:
    """Array chains whose element type is OBJECT, transitively reachable
    through relation-valid enclosing arrays only."""
    valid: set[Path] = set()
    by_depth = sorted(array_rows, key=lambda p: sum(1 for s in p if isinstance(s, _ArrayMarker)))
    for arr_path in by_depth:
        base = arr_path
        depth = 0
        while base and isinstance(base[-1], _ArrayMarker):
            base = base[:-1]
            depth += 1
        enclosing = _enclosing_relation(base)
        if enclosing != () and enclosing not in valid:
            continue
        base_type = types.get(base)
        if base_type is not None and _unwrap(base_type, depth) == OBJECT:
            valid.add(arr_path)
    return valid


def _build(
    types: dict[Path, FieldType],
    seen: dict[Path, int],
    array_rows: dict[Path, int],
    doc_count: int,
) -> InferredSchema:
    schema = InferredSchema(doc_count=doc_count)
    schema.array_rows = dict(array_rows)
    valid = _valid_relations(types, array_rows)
    ordered_relations: list[Path] = [()]

    def relation_of(path: Path) -> Path:
        for i in range(len(path), 0, -1):
            if isinstance(path[i - 1], _ArrayMarker):
                return path[:i]
        return ()

    for path, ftype in types.items():
        relation = relation_of(path)
        if relation != () and relation not in valid:
            continue
        if relation not in ordered_relations:
            ordered_relations.append(relation)
        rows = doc_count if relation == () else array_rows.get(relation, 0)
        path_seen = seen.get(path, 0)
        schema.fields[path] = FieldDescriptor(
            path=path,
            type=ftype,
            nullable=path_seen < rows,
            column_name=None,
            seen_count=path_seen,
        )
    # relations that exist but whose elements never carried keys still count
    for arr_path in array_rows:
        if arr_path in valid and arr_path not in ordered_relations:
            ordered_relations.append(arr_path)
    schema.relations = ordered_relations
    _assign_column_names(schema, valid)
    return schema


def sanitize_key(key: str) -> str:
    name = re.sub(r"[^0-9a-zA-Z]", "_", key).lower()
    if not name or not (name[0].isalpha() or name[0] == "_"):
        name = "_" + name
    return name


def _is_column(descriptor: FieldDescriptor, valid: set[Path]) -> bool:
    kind = descriptor.type.kind
    if kind == "OBJECT":
        return False
    if kind == "BOTTOM":
        return False
    if kind == "ARRAY":
        # arrays that became child relations are not columns of the parent
        chain = descriptor.path + (ARRAY,)
        ftype = descriptor.type
        while ftype.kind == "ARRAY":
            if chain in valid:
                return False
            chain = chain + (ARRAY,)
            ftype = ftype.element
        return True
    return True  # scalars, NULL, VARIANT


def _assign_column_names(schema: InferredSchema, valid: set[Path]) -> None:
    taken: dict[Path, set[str]] = {rel: set() for rel in schema.relations}
    for path, descriptor in schema.fields.items():
        if not _is_column(descriptor, valid):
            continue
        relation = schema.relation_of(path)
        relative = path[len(relation):]
        base = "__".join(sanitize_key(seg) for seg in relative)
        name = base
        suffix = 2
        while name in taken[relation]:
            name = f"{base}_{suffix}"
            suffix += 1
        taken[relation].add(name)
        descriptor.column_name = name


def merge(s1: InferredSchema, s2: InferredSchema) -> InferredSchema:
    """Combine two schemas as if their document sets had been concatenated."""
    types: dict[Path, FieldType] = {}
    seen: dict[Path, int] = {}
    for schema in (s1, s2):
        for path, descriptor in schema.fields.items():
            types[path] = join(types.get(path, BOTTOM), descriptor.type)
            seen[path] = seen.get(path, 0) + descriptor.seen_count
    array_rows: dict[Path, int] = dict(s1.array_rows)
    for path, rows in s2.array_rows.items():
        array_rows[path] = array_rows.get(path, 0) + rows
    return _build(types, seen, array_rows, s1.doc_count + s2.doc_count)


# -- SQL generation -----------------------------------------------------------

CASTABLE = {"BOOL", "INT", "FLOAT", "STRING"}


@dataclass
class GeneratedSql:
    root: str
    children: dict[str, str]  # relation view suffix -> SQL

    def all_queries(self) -> dict[str, str]:
        out = {"": self.root}
        out.update(self.children)
        return out


def relation_suffix(relation: Path) -> str:
    keys = [sanitize_key(seg) for seg in relation if not isinstance(seg, _ArrayMarker)]
    return "__".join(keys)


def _json_path(path: Path) -> str:
    return ".".join(seg for seg in path if not isinstance(seg, _ArrayMarker))


def generate_flatten_sql(
    schema: InferredSchema,
    source: str,
    payload_column: str = "payload",
    id_column: str | None = "_id",
) -> GeneratedSql:
    """Emit one SELECT per relation that reproduces the oracle flattening.

    Scalar columns are CAST from JSON_GET; VARIANT/NULL/array columns are
    emitted uncast with a comment marker. Child relations chain one FLATTEN
    per array level with positional _idx columns.
    """
    root_sql = _relation_sql(schema, (), source, payload_column, id_column)
    children: dict[str, str] = {}
    for relation in schema.relations:
        if relation == ():
            continue
        children[relation_suffix(relation)] = _relation_sql(
            schema, relation, source, payload_column, id_column
        )
    return GeneratedSql(root=root_sql, children=children)


def _relation_sql(
    schema: InferredSchema,
    relation: Path,
    source: str,
    payload_column: str,
    id_column: str | None,
) -> str:
    items: list[tuple[str, str]] = []  # (projection text, trailing comment)
    if id_column:
        items.append((f"src.{id_column} AS {id_column}", ""))

    # FROM chain: one FLATTEN per array marker along the relation path
    from_parts = [f"{source} AS src"]
    flatten_idx = 0
    consumed: Path = ()
    value_expr = f"src.{payload_column}"
    for i, seg in enumerate(relation):
        if isinstance(seg, _ArrayMarker):
            rel_keys = relation[len(consumed):i]
            key_path = _json_path(rel_keys)
            input_expr = f"JSON_GET({value_expr}, '{key_path}')" if key_path else value_expr
            alias = f"f{flatten_idx}"
            from_parts.append(f"LATERAL FLATTEN({input_expr}) AS {alias}")
            items.append((f"{alias}.index AS _idx{flatten_idx}", ""))
            value_expr = f"{alias}.value"
            consumed = relation[: i + 1]
            flatten_idx += 1

    columns = schema.columns_of(relation)
    if not columns and not relation:
        if id_column:
            return f"SELECT src.{id_column} AS {id_column} FROM {source} AS src"
        return f"SELECT 1 AS one FROM {source} AS src"
    for descriptor in columns:
        relative = descriptor.path[len(relation):]
        key_path = _json_path(relative)
        getter = f"JSON_GET({value_expr}, '{key_path}')"
        kind = descriptor.type.kind
        if kind in CASTABLE:
            items.append((f"CAST({getter} AS {kind}) AS {descriptor.column_name}", ""))
        else:
            items.append((f"{getter} AS {descriptor.column_name}", "-- variant: uncast"))
    lines = []
    for idx, (text, comment) in enumerate(items):
        separator = "," if idx < len(items) - 1 else ""
        suffix = f" {comment}" if comment else ""
        lines.append(f"  {text}{separator}{suffix}")
    select_list = "\n".join(lines)
    return f"SELECT\n{select_list}\nFROM {', '.join(from_parts)}"


def generate_view_models(
    schema: InferredSchema,
    source: str,
    base_name: str,
    payload_column: str = "payload",
    id_column: str | None = "_id",
) -> list[dict]:
    """View definitions (name, sql, description) for every relation."""
    generated = generate_flatten_sql(schema, source, payload_column, id_column)
    views = [
        {
            "name": f"{base_name}__flat",
            "sql": generated.root,
            "description": f"Flattened root relation of {source} ({len(schema.columns_of(()))} columns)",
        }
    ]
    for suffix, sql in generated.children.items():
        views.append(
            {
                "name": f"{base_name}__{suffix}",
                "sql": sql,
                "description": f"Flattened array relation {suffix} of {source}",
            }
        )
    return views
