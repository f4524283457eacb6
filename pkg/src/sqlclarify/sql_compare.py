"""SQL canonicalization, exact match, and execution match.

Exact match compares canonical token streams: keywords uppercased,
identifiers lowercased and unquoted, string literals byte-exact, numeric
literals normalized, comments and the trailing terminator dropped. No
semantic reordering is attempted; execution match covers semantic
equivalence instead.
"""

from __future__ import annotations

import sqlite3
import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ExecError, LexError

KEYWORDS = frozenset(
    """
    ALL ALTER AND AS ASC BETWEEN BY CASE CAST CHECK COLLATE CONSTRAINT CREATE
    CROSS CURRENT DEFAULT DELETE DESC DISTINCT DROP ELSE END ESCAPE EXCEPT
    EXISTS FALSE FILTER FOLLOWING FOREIGN FROM FULL GLOB GROUP HAVING IF IN
    INDEX INNER INSERT INTERSECT INTO IS JOIN KEY LEFT LIKE LIMIT NATURAL NOT
    NULL OFFSET ON OR ORDER OUTER OVER PARTITION PRECEDING PRIMARY RANGE
    RECURSIVE REFERENCES REGEXP RIGHT ROW ROWS SELECT SET TABLE THEN TRUE
    UNBOUNDED UNION UNIQUE UPDATE USING VALUES VIEW WHEN WHERE WINDOW WITH
    """.split()
)

_TWO_CHAR_OPS = ("<>", "<=", ">=", "!=", "==", "||", ">>", "<<")
_ONE_CHAR_OPS = set("=<>+-*/%&|~!")
_PUNCT = set("(),.;")


class TokenKind(str, Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    LITERAL = "literal"
    OPERATOR = "operator"
    PUNCT = "punct"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str


@dataclass(frozen=True)
class CanonicalSql:
    tokens: tuple[Token, ...]
    source: str


@dataclass(frozen=True)
class Divergence:
    index: int
    gold: str | None  # token text; None when one stream ended early
    pred: str | None


@dataclass(frozen=True)
class ComparisonReport:
    exact: bool
    execution: bool | None = None
    first_divergence: Divergence | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "execution": self.execution,
            "first_divergence": (
                None
                if self.first_divergence is None
                else {
                    "index": self.first_divergence.index,
                    "gold": self.first_divergence.gold,
                    "pred": self.first_divergence.pred,
                }
            ),
            "notes": self.notes,
        }


def _normalize_number(text: str) -> str:
    text = text.lstrip("+")
    sign = ""
    if text.startswith("-"):
        sign, text = "-", text[1:]
    text = text.lower()
    if "e" in text:
        mantissa, _, exponent = text.partition("e")
        exponent = exponent.lstrip("+")
    else:
        mantissa, exponent = text, ""
    if "." in mantissa:
        mantissa = mantissa.rstrip("0").rstrip(".")
        if mantissa in ("", "-"):
            mantissa += "0"
        if mantissa.startswith("."):
            mantissa = "0" + mantissa
    if sign == "-" and all(ch in "0." for ch in mantissa):
        sign = ""  # -0 is 0
    return sign + mantissa + (f"e{exponent}" if exponent else "")


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def canonicalize(sql: str) -> CanonicalSql:
    """Tokenize SQL text into its canonical stream.

    Raises:
        LexError: on unterminated strings/comments or stray characters,
            with the byte offset of the problem.
    """
    if not sql or not sql.strip():
        raise LexError("empty statement", 0)
    tokens: list[Token] = []
    i, n = 0, len(sql)

    def unary_position() -> bool:
        if not tokens:
            return True
        last = tokens[-1]
        if last.kind in (TokenKind.OPERATOR, TokenKind.KEYWORD):
            return True
        return last.kind is TokenKind.PUNCT and last.text in ("(", ",")

    def lex_number(start: int, sign: str = "") -> int:
        j = start
        while j < n and sql[j].isdigit():
            j += 1
        if j < n and sql[j] == ".":
            j += 1
            while j < n and sql[j].isdigit():
                j += 1
        if j < n and sql[j] in "eE":
            k = j + 1
            if k < n and sql[k] in "+-":
                k += 1
            if k < n and sql[k].isdigit():
                j = k
                while j < n and sql[j].isdigit():
                    j += 1
        tokens.append(Token(TokenKind.LITERAL, _normalize_number(sign + sql[start:j])))
        return j

    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end == -1:
                raise LexError("unterminated block comment", i)
            i = end + 2
            continue
        if ch == "'":
            j = i + 1
            while j < n:
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        j += 2
                        continue
                    break
                j += 1
            else:
                raise LexError("unterminated string literal", i)
            if j >= n:
                raise LexError("unterminated string literal", i)
            tokens.append(Token(TokenKind.LITERAL, sql[i : j + 1]))
            i = j + 1
            continue
        if ch in ('"', "`"):
            j = i + 1
            inner = []
            while j < n:
                if sql[j] == ch:
                    if j + 1 < n and sql[j + 1] == ch:
                        inner.append(ch)
                        j += 2
                        continue
                    break
                inner.append(sql[j])
                j += 1
            else:
                raise LexError("unterminated quoted identifier", i)
            if j >= n:
                raise LexError("unterminated quoted identifier", i)
            tokens.append(Token(TokenKind.IDENTIFIER, "".join(inner).lower()))
            i = j + 1
            continue
        if ch == "[":
            j = sql.find("]", i + 1)
            if j == -1:
                raise LexError("unterminated bracketed identifier", i)
            tokens.append(Token(TokenKind.IDENTIFIER, sql[i + 1 : j].lower()))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            i = lex_number(i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and _is_word_char(sql[j]):
                j += 1
            word = sql[i:j]
            if word.upper() in KEYWORDS:
                tokens.append(Token(TokenKind.KEYWORD, word.upper()))
            else:
                tokens.append(Token(TokenKind.IDENTIFIER, word.lower()))
            i = j
            continue
        if ch in "+-" and unary_position():
            j = i + 1
            while j < n and sql[j].isspace():
                j += 1
            if j < n and (sql[j].isdigit() or (sql[j] == "." and j + 1 < n and sql[j + 1].isdigit())):
                i = lex_number(j, sign="" if ch == "+" else "-")
                continue
        two = sql[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(TokenKind.OPERATOR, two))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(TokenKind.OPERATOR, ch))
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(TokenKind.PUNCT, ch))
            i += 1
            continue
        if ch in ":@$?":
            tokens.append(Token(TokenKind.OPERATOR, ch))
            i += 1
            continue
        raise LexError(f"unexpected character {ch!r}", i)

    while tokens and tokens[-1] == Token(TokenKind.PUNCT, ";"):
        tokens.pop()
    if not tokens:
        raise LexError("empty statement", 0)
    return CanonicalSql(tokens=tuple(tokens), source=sql)


def render(canonical: CanonicalSql) -> str:
    """Render a canonical stream back to text; re-canonicalizing is stable."""
    return " ".join(t.text for t in canonical.tokens)


def exact_match(pred: str, gold: str) -> ComparisonReport:
    """Token-stream equality of two statements, with the first divergence.

    Raises:
        LexError: if either side cannot be tokenized (callers typically
            report this as a non-match with a note).
    """
    gold_canon = canonicalize(gold)
    pred_canon = canonicalize(pred)
    if gold_canon.tokens == pred_canon.tokens:
        return ComparisonReport(exact=True)
    for idx, (g, p) in enumerate(zip(gold_canon.tokens, pred_canon.tokens)):
        if g != p:
            return ComparisonReport(
                exact=False,
                first_divergence=Divergence(index=idx, gold=g.text, pred=p.text),
            )
    shorter = min(len(gold_canon.tokens), len(pred_canon.tokens))
    gold_tail = gold_canon.tokens[shorter].text if shorter < len(gold_canon.tokens) else None
    pred_tail = pred_canon.tokens[shorter].text if shorter < len(pred_canon.tokens) else None
    return ComparisonReport(
        exact=False,
        first_divergence=Divergence(index=shorter, gold=gold_tail, pred=pred_tail),
        notes="streams differ in length",
    )


def _has_outer_order_by(canonical: CanonicalSql) -> bool:
    depth = 0
    for token in canonical.tokens:
        if token.kind is TokenKind.PUNCT and token.text == "(":
            depth += 1
        elif token.kind is TokenKind.PUNCT and token.text == ")":
            depth -= 1
        elif depth == 0 and token.kind is TokenKind.KEYWORD and token.text == "ORDER":
            return True
    return False


def _check_single_select(sql: str, side: str) -> CanonicalSql:
    try:
        canon = canonicalize(sql)
    except LexError as exc:
        raise ExecError(side, f"cannot tokenize: {exc}") from exc
    first = canon.tokens[0]
    if not (first.kind is TokenKind.KEYWORD and first.text in ("SELECT", "WITH")):
        raise ExecError(side, "only a single SELECT statement is allowed")
    if any(t.kind is TokenKind.PUNCT and t.text == ";" for t in canon.tokens):
        raise ExecError(side, "multiple statements are not allowed")
    return canon


def _run_readonly(sql: str, db: Path, side: str, timeout_ms: int):
    con = sqlite3.connect(f"file:{db}?mode=ro", uri=True)
    deadline = time.monotonic() + timeout_ms / 1000.0

    def interrupt_when_late():
        return 1 if time.monotonic() > deadline else 0

    con.set_progress_handler(interrupt_when_late, 1000)
    try:
        cursor = con.execute(sql)
        rows = cursor.fetchall()
        arity = len(cursor.description) if cursor.description else 0
    except sqlite3.Error as exc:
        message = str(exc)
        if "interrupted" in message.lower():
            message = f"statement timed out after {timeout_ms} ms"
        raise ExecError(side, message) from exc
    finally:
        con.close()
    return rows, arity


def execution_match(pred: str, gold: str, db: str | Path, timeout_ms: int = 5000) -> bool:
    """Run both queries read-only against ``db`` and compare result sets.

    Rows are compared as multisets unless the gold query's outermost level
    has an ORDER BY, in which case sequences are compared. Column names
    are ignored; arity must match.

    Raises:
        ExecError: if either side fails to tokenize, is not a single
            SELECT, errors during execution, or times out.
    """
    db_path = Path(db)
    if not db_path.is_file():
        raise ExecError("db", f"no such database file: {db_path}")
    gold_canon = _check_single_select(gold, "gold")
    _check_single_select(pred, "pred")
    gold_rows, gold_arity = _run_readonly(gold, db_path, "gold", timeout_ms)
    pred_rows, pred_arity = _run_readonly(pred, db_path, "pred", timeout_ms)
    if gold_arity != pred_arity:
        return False
    if _has_outer_order_by(gold_canon):
        return gold_rows == pred_rows
    return Counter(gold_rows) == Counter(pred_rows)
