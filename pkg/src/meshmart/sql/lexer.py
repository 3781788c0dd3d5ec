"""Tokenizer for the platform SQL subset.

Unquoted identifiers fold to lowercase; double-quoted identifiers are
verbatim. String literals use single quotes with '' escaping. `--` starts
a comment running to end of line. Every token carries 1-based line/column
for error reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import SqlSyntaxError

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "LIMIT", "WITH", "AS",
    "ON", "JOIN", "INNER", "LEFT", "OUTER", "LATERAL", "FLATTEN", "CREATE",
    "TABLE", "VIEW", "INSERT", "INTO", "DROP", "CAST", "AND", "OR", "NOT",
    "IS", "NULL", "TRUE", "FALSE", "ASC", "DESC", "DISTINCT",
}

_SYMBOLS = ("<=", ">=", "!=", "<>", "(", ")", ",", ".", "*", "=", "<", ">", "+", "-", "/", "%")


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD | IDENT | QIDENT | NUMBER | STRING | SYMBOL | EOF
    text: str
    value: object
    line: int
    column: int


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    col = 1
    n = len(sql)

    def error(message: str) -> SqlSyntaxError:
        return SqlSyntaxError(message, line, col)

    while pos < n:
        ch = sql[pos]
        if ch == "\n":
            pos += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            pos += 1
            col += 1
            continue
        if sql.startswith("--", pos):
            end = sql.find("\n", pos)
            if end == -1:
                break
            col += end - pos
            pos = end
            continue
        start_line, start_col = line, col
        if ch.isdigit() or (ch == "." and pos + 1 < n and sql[pos + 1].isdigit()):
            end = pos
            seen_dot = False
            seen_exp = False
            while end < n:
                c = sql[end]
                if c.isdigit():
                    end += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    end += 1
                elif c in "eE" and not seen_exp and end > pos:
                    seen_exp = True
                    end += 1
                    if end < n and sql[end] in "+-":
                        end += 1
                else:
                    break
            text = sql[pos:end]
            try:
                value = float(text) if (seen_dot or seen_exp) else int(text)
            except ValueError:
                raise error(f"bad numeric literal {text!r}")
            tokens.append(Token("NUMBER", text, value, start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch == "'":
            end = pos + 1
            buf = []
            while True:
                if end >= n:
                    raise error("unterminated string literal")
                if sql[end] == "'":
                    if end + 1 < n and sql[end + 1] == "'":
                        buf.append("'")
                        end += 2
                        continue
                    end += 1
                    break
                buf.append(sql[end])
                end += 1
            tokens.append(Token("STRING", sql[pos:end], "".join(buf), start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch == '"':
            end = pos + 1
            buf = []
            while True:
                if end >= n:
                    raise error("unterminated quoted identifier")
                if sql[end] == '"':
                    if end + 1 < n and sql[end + 1] == '"':
                        buf.append('"')
                        end += 2
                        continue
                    end += 1
                    break
                buf.append(sql[end])
                end += 1
            tokens.append(Token("QIDENT", sql[pos:end], "".join(buf), start_line, start_col))
            col += end - pos
            pos = end
            continue
        if ch.isalpha() or ch == "_":
            end = pos
            while end < n and (sql[end].isalnum() or sql[end] == "_"):
                end += 1
            text = sql[pos:end]
            upper = text.upper()
            if upper in KEYWORDS:
                tokens.append(Token("KEYWORD", upper, upper, start_line, start_col))
            else:
                tokens.append(Token("IDENT", text, text.lower(), start_line, start_col))
            col += end - pos
            pos = end
            continue
        matched = False
        for sym in _SYMBOLS:
            if sql.startswith(sym, pos):
                tokens.append(Token("SYMBOL", sym, sym, start_line, start_col))
                pos += len(sym)
                col += len(sym)
                matched = True
                break
        if not matched:
            raise error(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", "", None, line, col))
    return tokens
