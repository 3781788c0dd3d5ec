"""AST for the platform SQL subset, plus the canonical pretty-printer.

All nodes are frozen dataclasses with tuple children so equality and
hashing are structural; parse(print(stmt)) == stmt is a tested fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: object  # None | bool | int | float | str


@dataclass(frozen=True)
class ColumnRef:
    parts: tuple[str, ...]  # a | alias.a


@dataclass(frozen=True)
class Star:
    qualifier: str | None = None


@dataclass(frozen=True)
class FuncCall:
    name: str  # uppercased
    args: tuple["Expr", ...]
    star: bool = False  # COUNT(*)


@dataclass(frozen=True)
class Cast:
    expr: "Expr"
    type_name: str  # INT | FLOAT | BOOL | STRING | VARIANT


@dataclass(frozen=True)
class BinaryOp:
    op: str  # AND OR = != < > <= >= + - * / %
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnaryOp:
    op: str  # NOT | -
    expr: "Expr"


@dataclass(frozen=True)
class IsNull:
    expr: "Expr"
    negated: bool = False


Expr = Union[Literal, ColumnRef, FuncCall, Cast, BinaryOp, UnaryOp, IsNull]


# -- statements ----------------------------------------------------------------


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class FromTable:
    parts: tuple[str, ...]
    alias: str | None = None

    def binding(self) -> str:
        return self.alias or self.parts[-1]


@dataclass(frozen=True)
class FromSubquery:
    select: "Select"
    alias: str = "sub"

    def binding(self) -> str:
        return self.alias


@dataclass(frozen=True)
class FromFlatten:
    expr: Expr
    alias: str = "f"

    def binding(self) -> str:
        return self.alias


FromItem = Union[FromTable, FromSubquery, FromFlatten]


@dataclass(frozen=True)
class FromElement:
    """One FROM-clause element: the first is CROSS, later ones carry joins."""

    item: FromItem
    join: str = "cross"  # cross | inner | left
    on: Expr | None = None


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False


@dataclass(frozen=True)
class Cte:
    name: str
    select: "Select"


@dataclass(frozen=True)
class Select:
    items: tuple[Union[SelectItem, Star], ...]
    from_elements: tuple[FromElement, ...] = ()
    where: Expr | None = None
    group_by: tuple[Expr, ...] = ()
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None
    ctes: tuple[Cte, ...] = ()


@dataclass(frozen=True)
class CreateTableAs:
    parts: tuple[str, ...]
    select: Select


@dataclass(frozen=True)
class CreateViewAs:
    parts: tuple[str, ...]
    select: Select


@dataclass(frozen=True)
class InsertSelect:
    parts: tuple[str, ...]
    select: Select


@dataclass(frozen=True)
class Drop:
    kind: str  # table | view
    parts: tuple[str, ...]


Statement = Union[Select, CreateTableAs, CreateViewAs, InsertSelect, Drop]


# -- pretty printer ------------------------------------------------------------

_IDENT_OK = set("abcdefghijklmnopqrstuvwxyz0123456789_")


def _ident(name: str) -> str:
    if name and name[0].isalpha() and all(c in _IDENT_OK for c in name):
        return name
    return '"' + name.replace('"', '""') + '"'


def _qualified(parts: tuple[str, ...]) -> str:
    return ".".join(_ident(p) for p in parts)


def print_expr(expr: Expr) -> str:
    if isinstance(expr, Literal):
        v = expr.value
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, str):
            return "'" + v.replace("'", "''") + "'"
        return repr(v)
    if isinstance(expr, ColumnRef):
        return _qualified(expr.parts)
    if isinstance(expr, Star):
        return f"{_ident(expr.qualifier)}.*" if expr.qualifier else "*"
    if isinstance(expr, FuncCall):
        inner = "*" if expr.star else ", ".join(print_expr(a) for a in expr.args)
        return f"{expr.name}({inner})"
    if isinstance(expr, Cast):
        return f"CAST({print_expr(expr.expr)} AS {expr.type_name})"
    if isinstance(expr, BinaryOp):
        return f"{_operand(expr.left)} {expr.op} {_operand(expr.right)}"
    if isinstance(expr, UnaryOp):
        if expr.op == "NOT":
            return f"NOT {_operand(expr.expr)}"
        return f"-{_operand(expr.expr)}"
    if isinstance(expr, IsNull):
        middle = "IS NOT NULL" if expr.negated else "IS NULL"
        return f"{_operand(expr.expr)} {middle}"
    raise TypeError(f"unprintable expression: {expr!r}")


def _operand(expr: Expr) -> str:
    if isinstance(expr, (BinaryOp, UnaryOp, IsNull)):
        return f"({print_expr(expr)})"
    return print_expr(expr)


def _print_from_item(item: FromItem) -> str:
    if isinstance(item, FromTable):
        text = _qualified(item.parts)
        if item.alias:
            text += f" AS {_ident(item.alias)}"
        return text
    if isinstance(item, FromSubquery):
        return f"({print_select(item.select)}) AS {_ident(item.alias)}"
    if isinstance(item, FromFlatten):
        return f"LATERAL FLATTEN({print_expr(item.expr)}) AS {_ident(item.alias)}"
    raise TypeError(f"unprintable from item: {item!r}")


def print_select(select: Select) -> str:
    parts: list[str] = []
    if select.ctes:
        cte_texts = [f"{_ident(c.name)} AS ({print_select(c.select)})" for c in select.ctes]
        parts.append("WITH " + ", ".join(cte_texts))
    item_texts = []
    for item in select.items:
        if isinstance(item, Star):
            item_texts.append(print_expr(item))
        else:
            text = print_expr(item.expr)
            if item.alias:
                text += f" AS {_ident(item.alias)}"
            item_texts.append(text)
    parts.append("SELECT " + ", ".join(item_texts))
    if select.from_elements:
        from_texts = []
        for i, element in enumerate(select.from_elements):
            item_text = _print_from_item(element.item)
            if i == 0:
                from_texts.append(item_text)
            elif element.join == "cross":
                from_texts.append(f", {item_text}")
            else:
                keyword = "INNER JOIN" if element.join == "inner" else "LEFT JOIN"
                from_texts.append(f" {keyword} {item_text} ON {print_expr(element.on)}")
        parts.append("FROM " + "".join(from_texts))
    if select.where is not None:
        parts.append("WHERE " + print_expr(select.where))
    if select.group_by:
        parts.append("GROUP BY " + ", ".join(print_expr(e) for e in select.group_by))
    if select.order_by:
        order_texts = [
            print_expr(o.expr) + (" DESC" if o.descending else "") for o in select.order_by
        ]
        parts.append("ORDER BY " + ", ".join(order_texts))
    if select.limit is not None:
        parts.append(f"LIMIT {select.limit}")
    return " ".join(parts)


def print_statement(stmt: Statement) -> str:
    if isinstance(stmt, Select):
        return print_select(stmt)
    if isinstance(stmt, CreateTableAs):
        return f"CREATE TABLE {_qualified(stmt.parts)} AS {print_select(stmt.select)}"
    if isinstance(stmt, CreateViewAs):
        return f"CREATE VIEW {_qualified(stmt.parts)} AS {print_select(stmt.select)}"
    if isinstance(stmt, InsertSelect):
        return f"INSERT INTO {_qualified(stmt.parts)} {print_select(stmt.select)}"
    if isinstance(stmt, Drop):
        return f"DROP {stmt.kind.upper()} {_qualified(stmt.parts)}"
    raise TypeError(f"unprintable statement: {stmt!r}")
