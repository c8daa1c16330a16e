"""Query-log dialect: AST, parser, renderer, and exact replay.

The dialect covers single-table UPDATE/INSERT/DELETE statements with linear
SET expressions and AND/OR trees of comparison atoms, one statement per line,
`--` comments.  Every numeric literal in a parsed log is registered as a
ParamSlot so the repair machinery can treat it as a free constant.

Replay is pure and deterministic: `run_log` folds the log over an initial
state and returns every intermediate state.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .errors import (
    DuplicateInsertId,
    NonLinearExpression,
    QuerySyntaxError,
    UnknownAttribute,
)
from .relational import ID_ATTR, Relation, TupleRow
from .values import SCALE, Value, fixed, fmt, fmul


class ParamKind(enum.Enum):
    SET_ADDITIVE = "set-additive"
    SET_COEFFICIENT = "set-coefficient"
    WHERE_CONSTANT = "where-constant"
    INSERT_VALUE = "insert-value"


@dataclass(frozen=True)
class ParamSlot:
    slot_id: int
    original_value: Value
    location: tuple  # (query index, clause, position)
    kind: ParamKind


@dataclass(frozen=True)
class Lit:
    """A numeric literal occurrence; slot_id is None for implicit constants
    (e.g. the 1/-1 coefficients of `a - b`), which are not repairable."""

    value: Value
    slot_id: Optional[int] = None


@dataclass(frozen=True)
class Term:
    coeff: Lit
    attr: str


@dataclass(frozen=True)
class LinExpr:
    terms: tuple[Term, ...]
    const: Lit  # Lit(0, None) when absent

    def referenced_attrs(self) -> set[str]:
        return {t.attr for t in self.terms}


@dataclass(frozen=True)
class Atom:
    lhs: LinExpr
    op: str  # one of < <= = >= >
    rhs: Lit


@dataclass(frozen=True)
class BoolNode:
    kind: str  # 'and' | 'or'
    children: tuple

    def __post_init__(self):
        if self.kind not in ("and", "or") or not self.children:
            raise QuerySyntaxError(f"malformed boolean node {self.kind!r}")


class TruePred:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TRUE"


TRUE = TruePred()
Predicate = object  # Atom | BoolNode | TruePred

CMP_OPS = ("<=", ">=", "<", ">", "=")


@dataclass(frozen=True)
class UpdateQuery:
    index: int
    set_clauses: tuple[tuple[str, LinExpr], ...]
    where: Predicate


@dataclass(frozen=True)
class InsertQuery:
    index: int
    values: tuple[Lit, ...]  # one per schema attribute, in schema order


@dataclass(frozen=True)
class DeleteQuery:
    index: int
    where: Predicate


Query = object  # UpdateQuery | InsertQuery | DeleteQuery


class QueryLog:
    """Ordered queries q_1..q_n plus the slot table for their literals."""

    def __init__(self, queries: Sequence[Query], slots: dict[int, ParamSlot], table: str = "T"):
        self.queries = tuple(queries)
        for pos, q in enumerate(self.queries, start=1):
            if q.index != pos:
                raise QuerySyntaxError(f"query index {q.index} at position {pos}")
        self.slots = dict(slots)
        self.table = table

    def __len__(self):
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def __eq__(self, other):
        if not isinstance(other, QueryLog):
            return NotImplemented
        return self.queries == other.queries and self.table == other.table

    def query(self, index: int) -> Query:
        return self.queries[index - 1]

    def slots_of(self, index: int) -> list[ParamSlot]:
        return [s for s in self.slots.values() if s.location[0] == index]

    def with_params(self, new_values: dict[int, Value]) -> "QueryLog":
        """Structure-preserving copy with some slot literals replaced."""
        if not new_values:
            return self

        def fix_lit(lit: Lit) -> Lit:
            if lit.slot_id is not None and lit.slot_id in new_values:
                return Lit(new_values[lit.slot_id], lit.slot_id)
            return lit

        def fix_expr(e: LinExpr) -> LinExpr:
            return LinExpr(
                tuple(Term(fix_lit(t.coeff), t.attr) for t in e.terms), fix_lit(e.const)
            )

        def fix_pred(p):
            if p is TRUE:
                return p
            if isinstance(p, Atom):
                return Atom(fix_expr(p.lhs), p.op, fix_lit(p.rhs))
            return BoolNode(p.kind, tuple(fix_pred(c) for c in p.children))

        queries = []
        for q in self.queries:
            if isinstance(q, UpdateQuery):
                queries.append(
                    UpdateQuery(
                        q.index,
                        tuple((a, fix_expr(e)) for a, e in q.set_clauses),
                        fix_pred(q.where),
                    )
                )
            elif isinstance(q, InsertQuery):
                queries.append(InsertQuery(q.index, tuple(fix_lit(v) for v in q.values)))
            else:
                queries.append(DeleteQuery(q.index, fix_pred(q.where)))
        slots = {
            sid: replace(s, original_value=new_values.get(sid, s.original_value))
            for sid, s in self.slots.items()
        }
        return QueryLog(queries, slots, self.table)


def predicate_atoms(p) -> list[Atom]:
    if p is TRUE:
        return []
    if isinstance(p, Atom):
        return [p]
    out = []
    for c in p.children:
        out.extend(predicate_atoms(c))
    return out


def predicate_attrs(p) -> set[str]:
    out: set[str] = set()
    for a in predicate_atoms(p):
        out |= a.lhs.referenced_attrs()
    return out


# ---------------------------------------------------------------------------
# Parser


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|[<>=])|(?P<punct>[(),;*+\-]))"
)

_KEYWORDS = {
    "update", "set", "where", "insert", "into", "values",
    "delete", "from", "and", "or", "between", "true",
}


class _Tokens:
    def __init__(self, text: str, line_no: int):
        self.line_no = line_no
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip():
                    raise QuerySyntaxError(
                        f"unexpected character {text[pos:].strip()[0]!r}", line_no, pos + 1
                    )
                break
            for kind in ("num", "ident", "op", "punct"):
                val = m.group(kind)
                if val is not None:
                    self.toks.append((kind, val, m.start(kind) + 1))
                    break
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise QuerySyntaxError("unexpected end of statement", self.line_no)
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.next()
        if val.lower() != value.lower():
            raise QuerySyntaxError(f"expected {value!r}, found {val!r}", self.line_no, col)

    def at_keyword(self, *words) -> bool:
        kind, val, _ = self.peek()
        return kind == "ident" and val.lower() in words

    def done(self) -> bool:
        return self.i >= len(self.toks)


class _Parser:
    def __init__(self, schema_attrs: Sequence[str]):
        self.attrs = tuple(schema_attrs)
        self.valid_idents = set(self.attrs) | {ID_ATTR}
        self.slots: dict[int, ParamSlot] = {}
        self.next_slot = 0
        self.table: Optional[str] = None

    def new_slot(self, value: Value, location, kind: ParamKind) -> Lit:
        sid = self.next_slot
        self.next_slot += 1
        self.slots[sid] = ParamSlot(sid, value, location, kind)
        return Lit(value, sid)

    def parse(self, text: str) -> QueryLog:
        queries = []
        index = 0
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("--", 1)[0].strip()
            if not line:
                continue
            for stmt in self._split_statements(line, line_no):
                index += 1
                queries.append(self._statement(stmt, line_no, index))
        return QueryLog(queries, self.slots, self.table or "T")

    @staticmethod
    def _split_statements(line: str, line_no: int):
        parts = line.split(";")
        if parts[-1].strip():
            raise QuerySyntaxError("statement not terminated by ';'", line_no, len(line))
        return [p for p in (s.strip() for s in parts[:-1]) if p]

    def _statement(self, text: str, line_no: int, index: int):
        toks = _Tokens(text, line_no)
        kind, val, col = toks.next()
        word = val.lower() if kind == "ident" else None
        if word == "update":
            q = self._update(toks, line_no, index)
        elif word == "insert":
            q = self._insert(toks, line_no, index)
        elif word == "delete":
            q = self._delete(toks, line_no, index)
        else:
            raise QuerySyntaxError(f"unknown statement {val!r}", line_no, col)
        if not toks.done():
            _, extra, col = toks.next()
            raise QuerySyntaxError(f"trailing tokens after statement: {extra!r}", line_no, col)
        return q

    def _table_name(self, toks: _Tokens) -> str:
        kind, val, col = toks.next()
        if kind != "ident" or val.lower() in _KEYWORDS:
            raise QuerySyntaxError(f"expected table name, found {val!r}", toks.line_no, col)
        if self.table is None:
            self.table = val
        elif self.table != val:
            raise QuerySyntaxError(
                f"log references two tables: {self.table!r} and {val!r}", toks.line_no, col
            )
        return val

    def _attr_name(self, toks: _Tokens, allow_id=True) -> str:
        kind, val, col = toks.next()
        if kind != "ident":
            raise QuerySyntaxError(f"expected attribute, found {val!r}", toks.line_no, col)
        if val not in self.valid_idents or (val == ID_ATTR and not allow_id):
            raise UnknownAttribute(f"unknown attribute {val!r} (line {toks.line_no})")
        return val

    def _update(self, toks, line_no, index) -> UpdateQuery:
        self._table_name(toks)
        toks.expect("set")
        set_clauses = []
        pos = 0
        while True:
            attr = self._attr_name(toks, allow_id=False)
            toks.expect("=")
            expr = self._lin_expr(toks, line_no, (index, "set", pos))
            set_clauses.append((attr, expr))
            pos += 1
            if toks.at_keyword("where") or toks.done():
                break
            toks.expect(",")
        seen = [a for a, _ in set_clauses]
        if len(set(seen)) != len(seen):
            raise QuerySyntaxError(f"attribute set twice: {seen}", line_no)
        where = self._where(toks, line_no, index)
        return UpdateQuery(index, tuple(set_clauses), where)

    def _insert(self, toks, line_no, index) -> InsertQuery:
        toks.expect("into")
        self._table_name(toks)
        cols = list(self.attrs)
        if toks.peek()[1] == "(":
            toks.next()
            cols = []
            while True:
                cols.append(self._attr_name(toks, allow_id=False))
                kind, val, col = toks.next()
                if val == ")":
                    break
                if val != ",":
                    raise QuerySyntaxError(f"expected ',' in column list", line_no, col)
            if sorted(cols) != sorted(self.attrs):
                raise UnknownAttribute(
                    f"INSERT column list {cols} must cover the schema {list(self.attrs)}"
                )
        toks.expect("values")
        toks.expect("(")
        lits = []
        pos = 0
        while True:
            lits.append(self._number(toks, (index, "insert", pos), ParamKind.INSERT_VALUE))
            pos += 1
            kind, val, col = toks.next()
            if val == ")":
                break
            if val != ",":
                raise QuerySyntaxError("expected ',' in VALUES", line_no, col)
        if len(lits) != len(self.attrs):
            raise QuerySyntaxError(
                f"INSERT provides {len(lits)} values for {len(self.attrs)} attributes", line_no
            )
        by_col = dict(zip(cols, lits))
        return InsertQuery(index, tuple(by_col[a] for a in self.attrs))

    def _delete(self, toks, line_no, index) -> DeleteQuery:
        toks.expect("from")
        self._table_name(toks)
        return DeleteQuery(index, self._where(toks, line_no, index))

    def _where(self, toks, line_no, index):
        if toks.done():
            return TRUE
        toks.expect("where")
        if toks.at_keyword("true"):
            toks.next()
            return TRUE
        return self._or_expr(toks, line_no, index)

    def _or_expr(self, toks, line_no, index):
        children = [self._and_expr(toks, line_no, index)]
        while toks.at_keyword("or"):
            toks.next()
            children.append(self._and_expr(toks, line_no, index))
        return children[0] if len(children) == 1 else BoolNode("or", tuple(children))

    def _and_expr(self, toks, line_no, index):
        children = [self._atom(toks, line_no, index)]
        while toks.at_keyword("and"):
            toks.next()
            children.append(self._atom(toks, line_no, index))
        flat = []
        for c in children:
            if isinstance(c, BoolNode) and c.kind == "and":
                flat.extend(c.children)
            else:
                flat.append(c)
        return flat[0] if len(flat) == 1 else BoolNode("and", tuple(flat))

    def _atom(self, toks, line_no, index):
        if toks.peek()[1] == "(":
            toks.next()
            inner = self._or_expr(toks, line_no, index)
            toks.expect(")")
            return inner
        lhs = self._lin_expr(toks, line_no, (index, "where", toks.i))
        if toks.at_keyword("between"):
            # a BETWEEN x AND y desugars to a >= x AND a <= y
            toks.next()
            lo = self._number(toks, (index, "where", toks.i), ParamKind.WHERE_CONSTANT)
            toks.expect("and")
            hi = self._number(toks, (index, "where", toks.i), ParamKind.WHERE_CONSTANT)
            return BoolNode("and", (Atom(lhs, ">=", lo), Atom(lhs, "<=", hi)))
        kind, op, col = toks.next()
        if kind != "op":
            raise QuerySyntaxError(f"expected comparison, found {op!r}", line_no, col)
        if op == "==":
            op = "="
        rhs = self._number(toks, (index, "where", toks.i), ParamKind.WHERE_CONSTANT)
        return Atom(lhs, op, rhs)

    def _number(self, toks, location, kind: ParamKind, sign: int = 1) -> Lit:
        k, val, col = toks.next()
        if val == "-":
            return self._number(toks, location, kind, -sign)
        if k != "num":
            raise QuerySyntaxError(f"expected number, found {val!r}", toks.line_no, col)
        return self.new_slot(sign * fixed(val), location, kind)

    def _lin_expr(self, toks, line_no, location) -> LinExpr:
        """number | attr | number '*' attr | attr '*' number, joined by +/-."""
        terms: list[Term] = []
        const: Optional[Lit] = None
        sign = 1
        base_loc = location
        part = 0
        while True:
            k, val, col = toks.peek()
            loc = base_loc + (part,)
            if k == "num" or val == "-":
                lit_sign = sign
                if val == "-":
                    toks.next()
                    lit_sign = -sign
                    k, val, col = toks.peek()
                    if k != "num":
                        raise QuerySyntaxError(f"expected number after '-'", line_no, col)
                toks.next()
                if toks.peek()[1] == "*":
                    toks.next()
                    attr = self._attr_name(toks)
                    coeff = self.new_slot(lit_sign * fixed(val), loc, ParamKind.SET_COEFFICIENT)
                    terms.append(Term(coeff, attr))
                else:
                    if const is not None:
                        raise QuerySyntaxError(
                            "at most one additive constant per expression", line_no, col
                        )
                    const = self.new_slot(lit_sign * fixed(val), loc, _const_kind(base_loc))
            elif k == "ident" and val in self.valid_idents:
                attr = self._attr_name(toks)
                if toks.peek()[1] == "*":
                    toks.next()
                    k2, v2, c2 = toks.peek()
                    if k2 == "ident":
                        raise NonLinearExpression(
                            f"product of attributes {attr!r} * {v2!r} (line {line_no})"
                        )
                    lit = self._number(toks, loc, ParamKind.SET_COEFFICIENT, sign)
                    terms.append(Term(lit, attr))
                else:
                    terms.append(Term(Lit(sign * SCALE, None), attr))
            else:
                raise QuerySyntaxError(f"expected expression, found {val!r}", line_no, col)
            part += 1
            nxt = toks.peek()[1]
            if nxt == "+":
                toks.next()
                sign = 1
            elif nxt == "-":
                toks.next()
                sign = -1
            else:
                break
        attrs_seen = [t.attr for t in terms]
        if len(set(attrs_seen)) != len(attrs_seen):
            raise QuerySyntaxError("attribute appears twice in one expression", line_no)
        return LinExpr(tuple(terms), const if const is not None else Lit(0, None))


def _const_kind(location) -> ParamKind:
    return ParamKind.WHERE_CONSTANT if location[1] == "where" else ParamKind.SET_ADDITIVE


def parse_log(text: str, schema_attrs: Sequence[str]) -> QueryLog:
    """Parse a log; every numeric literal is registered as a ParamSlot."""
    return _Parser(schema_attrs).parse(text)


# ---------------------------------------------------------------------------
# Renderer


def render_expr(e: LinExpr) -> str:
    parts = []
    for t in e.terms:
        coeff = t.coeff.value
        if coeff == SCALE and t.coeff.slot_id is None:
            piece = t.attr
        elif coeff == -SCALE and t.coeff.slot_id is None:
            piece = f"-{t.attr}"
        else:
            piece = f"{fmt(coeff)} * {t.attr}"
        parts.append(piece)
    if e.const.value != 0 or e.const.slot_id is not None:
        parts.append(fmt(e.const.value))
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def render_pred(p, parent: Optional[str] = None) -> str:
    if p is TRUE:
        return "TRUE"
    if isinstance(p, Atom):
        return f"{render_expr(p.lhs)} {p.op} {fmt(p.rhs.value)}"
    sep = " AND " if p.kind == "and" else " OR "
    inner = sep.join(render_pred(c, p.kind) for c in p.children)
    if parent is not None and parent != p.kind:
        return f"({inner})"
    return inner


def render_query(q, table: str) -> str:
    if isinstance(q, UpdateQuery):
        sets = ", ".join(f"{a} = {render_expr(e)}" for a, e in q.set_clauses)
        return f"UPDATE {table} SET {sets} WHERE {render_pred(q.where)};"
    if isinstance(q, InsertQuery):
        vals = ", ".join(fmt(v.value) for v in q.values)
        return f"INSERT INTO {table} VALUES ({vals});"
    return f"DELETE FROM {table} WHERE {render_pred(q.where)};"


def render_log(log: QueryLog) -> str:
    return "\n".join(render_query(q, log.table) for q in log.queries) + "\n"


# ---------------------------------------------------------------------------
# Replay


def eval_expr(e: LinExpr, row: TupleRow, attr_index: dict[str, int]) -> Value:
    total = e.const.value
    for t in e.terms:
        v = row.id * SCALE if t.attr == ID_ATTR else row.values[attr_index[t.attr]]
        total += fmul(t.coeff.value, v)
    return total


def eval_predicate(p, row: TupleRow, attr_index: dict[str, int]) -> bool:
    if p is TRUE:
        return True
    if isinstance(p, Atom):
        lhs = eval_expr(p.lhs, row, attr_index)
        rhs = p.rhs.value
        if p.op == "<":
            return lhs < rhs
        if p.op == "<=":
            return lhs <= rhs
        if p.op == "=":
            return lhs == rhs
        if p.op == ">=":
            return lhs >= rhs
        return lhs > rhs
    if p.kind == "and":
        return all(eval_predicate(c, row, attr_index) for c in p.children)
    return any(eval_predicate(c, row, attr_index) for c in p.children)


def _index_map(state: Relation) -> dict[str, int]:
    return {a.name: a.index for a in state.schema}


def apply_query(q, state: Relation) -> Relation:
    """One replay step; non-matching rows are untouched, input is unmodified."""
    idx = _index_map(state)
    if isinstance(q, InsertQuery):
        new_id = state.max_id() + 1
        if new_id in state.rows:
            raise DuplicateInsertId(f"insert id {new_id} already present")
        rows = list(state.rows.values())
        rows.append(TupleRow(new_id, tuple(v.value for v in q.values)))
        return state.with_rows(rows)
    if isinstance(q, DeleteQuery):
        rows = [r for r in state.rows.values() if not eval_predicate(q.where, r, idx)]
        return state.with_rows(rows)
    rows = []
    for r in state.rows.values():
        if eval_predicate(q.where, r, idx):
            vals = list(r.values)
            for attr, expr in q.set_clauses:
                # all SET expressions read the pre-update tuple
                vals[idx[attr]] = eval_expr(expr, r, idx)
            rows.append(TupleRow(r.id, tuple(vals)))
        else:
            rows.append(r)
    return state.with_rows(rows)


@dataclass
class ReplayResult:
    final: Relation
    trace: list  # trace[i] is the state after q_1..q_i; trace[0] == d0
    inserted_ids: dict[int, int]  # query index -> id it created


def run_log(log: QueryLog, d0: Relation) -> ReplayResult:
    trace = [d0]
    inserted = {}
    state = d0
    for q in log.queries:
        if isinstance(q, InsertQuery):
            inserted[q.index] = state.max_id() + 1
        state = apply_query(q, state)
        trace.append(state)
    return ReplayResult(state, trace, inserted)
