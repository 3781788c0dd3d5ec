"""Recursive-descent parser for the platform SQL subset.

Grammar is documented in docs/sql_grammar.md; errors carry position and
the expectation that failed.
"""

from __future__ import annotations

from ..errors import SqlSyntaxError
from .ast import (
    BinaryOp,
    Cast,
    ColumnRef,
    CreateTableAs,
    CreateViewAs,
    Cte,
    Drop,
    FromElement,
    FromFlatten,
    FromSubquery,
    FromTable,
    FuncCall,
    InsertSelect,
    IsNull,
    Literal,
    OrderItem,
    Select,
    SelectItem,
    Star,
    Statement,
    UnaryOp,
)
from .lexer import Token, tokenize

_COMPARISONS = {"=", "!=", "<>", "<", ">", "<=", ">="}
_CAST_TYPES = {"INT", "FLOAT", "BOOL", "STRING", "VARIANT"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, expected: str) -> SqlSyntaxError:
        tok = self.peek()
        found = tok.text or "end of input"
        return SqlSyntaxError(f"expected {expected}, found {found!r}", tok.line, tok.column)

    def at_keyword(self, *names: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.value in names

    def take_keyword(self, *names: str) -> bool:
        if self.at_keyword(*names):
            self.advance()
            return True
        return False

    def expect_keyword(self, name: str) -> None:
        if not self.take_keyword(name):
            raise self.error(name)

    def at_symbol(self, *symbols: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYMBOL" and tok.value in symbols

    def take_symbol(self, *symbols: str) -> bool:
        if self.at_symbol(*symbols):
            self.advance()
            return True
        return False

    def expect_symbol(self, symbol: str) -> None:
        if not self.take_symbol(symbol):
            raise self.error(f"'{symbol}'")

    def identifier(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind in ("IDENT", "QIDENT"):
            self.advance()
            return tok.value
        raise self.error(what)

    def name_parts(self) -> tuple[str, ...]:
        parts = [self.identifier("object name")]
        while self.at_symbol(".") and self.peek(1).kind in ("IDENT", "QIDENT"):
            self.advance()
            parts.append(self.identifier())
        return tuple(parts)

    # -- statements --------------------------------------------------------------

    def statement(self) -> Statement:
        if self.at_keyword("SELECT", "WITH"):
            return self.select()
        if self.at_keyword("CREATE"):
            self.advance()
            if self.take_keyword("TABLE"):
                parts = self.name_parts()
                self.expect_keyword("AS")
                return CreateTableAs(parts, self.select())
            if self.take_keyword("VIEW"):
                parts = self.name_parts()
                self.expect_keyword("AS")
                return CreateViewAs(parts, self.select())
            raise self.error("TABLE or VIEW")
        if self.at_keyword("INSERT"):
            self.advance()
            self.expect_keyword("INTO")
            parts = self.name_parts()
            return InsertSelect(parts, self.select())
        if self.at_keyword("DROP"):
            self.advance()
            if self.take_keyword("TABLE"):
                return Drop("table", self.name_parts())
            if self.take_keyword("VIEW"):
                return Drop("view", self.name_parts())
            raise self.error("TABLE or VIEW")
        raise self.error("SELECT, CREATE, INSERT, or DROP")

    def select(self) -> Select:
        ctes: list[Cte] = []
        if self.take_keyword("WITH"):
            while True:
                name = self.identifier("CTE name")
                self.expect_keyword("AS")
                self.expect_symbol("(")
                ctes.append(Cte(name, self.select()))
                self.expect_symbol(")")
                if not self.take_symbol(","):
                    break
        self.expect_keyword("SELECT")
        items: list = []
        while True:
            items.append(self.select_item())
            if not self.take_symbol(","):
                break
        from_elements: list[FromElement] = []
        if self.take_keyword("FROM"):
            from_elements.append(FromElement(self.from_item()))
            while True:
                if self.take_symbol(","):
                    from_elements.append(FromElement(self.from_item()))
                    continue
                join_kind = None
                if self.at_keyword("JOIN", "INNER"):
                    if self.take_keyword("INNER"):
                        pass
                    self.expect_keyword("JOIN")
                    join_kind = "inner"
                elif self.at_keyword("LEFT"):
                    self.advance()
                    self.take_keyword("OUTER")
                    self.expect_keyword("JOIN")
                    join_kind = "left"
                if join_kind is None:
                    break
                item = self.from_item()
                self.expect_keyword("ON")
                on_expr = self.expr()
                from_elements.append(FromElement(item, join_kind, on_expr))
        where = self.expr() if self.take_keyword("WHERE") else None
        group_by: list = []
        if self.take_keyword("GROUP"):
            self.expect_keyword("BY")
            while True:
                group_by.append(self.expr())
                if not self.take_symbol(","):
                    break
        order_by: list[OrderItem] = []
        if self.take_keyword("ORDER"):
            self.expect_keyword("BY")
            while True:
                expr = self.expr()
                descending = False
                if self.take_keyword("DESC"):
                    descending = True
                else:
                    self.take_keyword("ASC")
                order_by.append(OrderItem(expr, descending))
                if not self.take_symbol(","):
                    break
        limit = None
        if self.take_keyword("LIMIT"):
            tok = self.peek()
            if tok.kind != "NUMBER" or not isinstance(tok.value, int):
                raise self.error("integer LIMIT")
            self.advance()
            limit = tok.value
        return Select(
            items=tuple(items),
            from_elements=tuple(from_elements),
            where=where,
            group_by=tuple(group_by),
            order_by=tuple(order_by),
            limit=limit,
            ctes=tuple(ctes),
        )

    def select_item(self):
        if self.at_symbol("*"):
            self.advance()
            return Star()
        # qualified star: ident.*
        if (
            self.peek().kind in ("IDENT", "QIDENT")
            and self.peek(1).kind == "SYMBOL"
            and self.peek(1).value == "."
            and self.peek(2).kind == "SYMBOL"
            and self.peek(2).value == "*"
        ):
            qualifier = self.identifier()
            self.advance()
            self.advance()
            return Star(qualifier)
        expr = self.expr()
        alias = None
        if self.take_keyword("AS"):
            alias = self.identifier("alias")
        elif self.peek().kind in ("IDENT", "QIDENT"):
            alias = self.identifier()
        return SelectItem(expr, alias)

    def from_item(self):
        if self.take_keyword("LATERAL"):
            self.expect_keyword("FLATTEN")
            self.expect_symbol("(")
            expr = self.expr()
            self.expect_symbol(")")
            self.take_keyword("AS")
            return FromFlatten(expr, self.identifier("flatten alias"))
        if self.at_keyword("FLATTEN"):
            self.advance()
            self.expect_symbol("(")
            expr = self.expr()
            self.expect_symbol(")")
            self.take_keyword("AS")
            return FromFlatten(expr, self.identifier("flatten alias"))
        if self.take_symbol("("):
            select = self.select()
            self.expect_symbol(")")
            self.take_keyword("AS")
            return FromSubquery(select, self.identifier("subquery alias"))
        parts = self.name_parts()
        alias = None
        if self.take_keyword("AS"):
            alias = self.identifier("alias")
        elif self.peek().kind in ("IDENT", "QIDENT"):
            alias = self.identifier()
        return FromTable(parts, alias)

    # -- expressions ----------------------------------------------------------------

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.take_keyword("OR"):
            left = BinaryOp("OR", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.take_keyword("AND"):
            left = BinaryOp("AND", left, self.not_expr())
        return left

    def not_expr(self):
        if self.take_keyword("NOT"):
            return UnaryOp("NOT", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        tok = self.peek()
        if tok.kind == "SYMBOL" and tok.value in _COMPARISONS:
            self.advance()
            op = "!=" if tok.value == "<>" else tok.value
            return BinaryOp(op, left, self.additive())
        if self.at_keyword("IS"):
            self.advance()
            negated = self.take_keyword("NOT")
            self.expect_keyword("NULL")
            return IsNull(left, negated)
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at_symbol("+", "-"):
            op = self.advance().value
            left = BinaryOp(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at_symbol("*", "/", "%"):
            op = self.advance().value
            left = BinaryOp(op, left, self.unary())
        return left

    def unary(self):
        if self.take_symbol("-"):
            inner = self.unary()
            if isinstance(inner, Literal) and isinstance(inner.value, (int, float)):
                return Literal(-inner.value)
            return UnaryOp("-", inner)
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Literal(tok.value)
        if tok.kind == "STRING":
            self.advance()
            return Literal(tok.value)
        if tok.kind == "KEYWORD":
            if tok.value == "NULL":
                self.advance()
                return Literal(None)
            if tok.value == "TRUE":
                self.advance()
                return Literal(True)
            if tok.value == "FALSE":
                self.advance()
                return Literal(False)
            if tok.value == "CAST":
                self.advance()
                self.expect_symbol("(")
                inner = self.expr()
                self.expect_keyword("AS")
                type_tok = self.peek()
                if type_tok.kind == "IDENT" and type_tok.value.upper() in _CAST_TYPES:
                    self.advance()
                    type_name = type_tok.value.upper()
                else:
                    raise self.error("cast type (INT, FLOAT, BOOL, STRING, VARIANT)")
                self.expect_symbol(")")
                return Cast(inner, type_name)
            raise self.error("expression")
        if tok.kind == "SYMBOL" and tok.value == "(":
            self.advance()
            if self.at_keyword("SELECT", "WITH"):
                raise SqlSyntaxError(
                    "subqueries are only allowed in FROM", tok.line, tok.column
                )
            inner = self.expr()
            self.expect_symbol(")")
            return inner
        if tok.kind in ("IDENT", "QIDENT"):
            # function call?
            if self.peek(1).kind == "SYMBOL" and self.peek(1).value == "(":
                name = self.identifier().upper()
                self.expect_symbol("(")
                if self.take_symbol("*"):
                    self.expect_symbol(")")
                    return FuncCall(name, (), star=True)
                args: list = []
                if not self.at_symbol(")"):
                    while True:
                        args.append(self.expr())
                        if not self.take_symbol(","):
                            break
                self.expect_symbol(")")
                return FuncCall(name, tuple(args))
            parts = [self.identifier()]
            while self.at_symbol(".") and self.peek(1).kind in ("IDENT", "QIDENT"):
                self.advance()
                parts.append(self.identifier())
            return ColumnRef(tuple(parts))
        raise self.error("expression")


def parse(sql: str) -> Statement:
    """Parse one statement; SqlSyntaxError carries line/column on failure."""
    parser = _Parser(tokenize(sql))
    stmt = parser.statement()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise SqlSyntaxError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)
    return stmt
