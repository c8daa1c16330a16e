"""Database states, tuples and complaints.

A Relation is an id-keyed collection of numeric rows over a fixed schema.
States are immutable: every transformation returns a new Relation.  A
Complaint maps a tuple of the final state to its asserted correct form
(value change, removal, or addition); a consistent set of complaints applied
to a state yields the user's view of the truth.
"""

from __future__ import annotations

import io
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InconsistentComplaints, SchemaMismatch, UnknownTarget
from .values import Value, as_float, fixed, fmt

ID_ATTR = "id"


@dataclass(frozen=True)
class AttrId:
    """0-based attribute position plus its column name."""

    index: int
    name: str


@dataclass(frozen=True)
class TupleRow:
    id: int
    values: tuple[Value, ...]


class Relation:
    """Immutable single-table state: schema, id-keyed rows, per-attr bounds."""

    def __init__(
        self,
        schema: Sequence[AttrId],
        rows: Iterable[TupleRow] = (),
        domain_hint: Optional[Sequence[tuple[Value, Value]]] = None,
    ):
        schema = tuple(schema)
        names = [a.name for a in schema]
        if len(set(names)) != len(names) or ID_ATTR in names:
            raise SchemaMismatch(f"attribute names must be unique and not {ID_ATTR!r}: {names}")
        for i, a in enumerate(schema):
            if a.index != i:
                raise SchemaMismatch(f"attribute {a.name} has index {a.index}, expected {i}")
        self.schema = schema
        row_map: dict[int, TupleRow] = {}
        for r in rows:
            if len(r.values) != len(schema):
                raise SchemaMismatch(
                    f"row {r.id} has {len(r.values)} values for {len(schema)} attributes"
                )
            if r.id in row_map:
                raise SchemaMismatch(f"duplicate row id {r.id}")
            row_map[r.id] = r
        self.rows = row_map
        if domain_hint is None:
            domain_hint = self._observed_domain()
        self.domain_hint = tuple(domain_hint)

    def _observed_domain(self) -> tuple[tuple[Value, Value], ...]:
        # min/max observed, widened by 10% of the span (at least one unit)
        hints = []
        for j in range(len(self.schema)):
            col = [r.values[j] for r in self.rows.values()]
            if not col:
                hints.append((fixed(0), fixed(1)))
                continue
            lo, hi = min(col), max(col)
            pad = max((hi - lo) // 10, fixed(1))
            hints.append((min(lo, 0), hi + pad))
        return tuple(hints)

    @property
    def attr_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    def attr_index(self, name: str) -> int:
        for a in self.schema:
            if a.name == name:
                return a.index
        raise SchemaMismatch(f"no attribute named {name!r}")

    def value(self, row_id: int, attr: str) -> Value:
        return self.rows[row_id].values[self.attr_index(attr)]

    def max_id(self) -> int:
        return max(self.rows, default=0)

    def with_rows(self, rows: Iterable[TupleRow]) -> "Relation":
        return Relation(self.schema, rows, self.domain_hint)

    def same_schema(self, other: "Relation") -> bool:
        return self.attr_names == other.attr_names

    def __eq__(self, other):
        if not isinstance(other, Relation):
            return NotImplemented
        return self.attr_names == other.attr_names and self.rows == other.rows

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"Relation({list(self.attr_names)}, {len(self.rows)} rows)"


@dataclass(frozen=True)
class Complaint:
    """target_id None means addition; expected None means deletion."""

    target_id: Optional[int]
    expected: Optional[tuple[Value, ...]]

    def __post_init__(self):
        if self.target_id is None and self.expected is None:
            raise InconsistentComplaints("complaint with neither target nor expected value")

    @property
    def is_deletion(self) -> bool:
        return self.expected is None

    @property
    def is_addition_without_id(self) -> bool:
        return self.target_id is None


class ComplaintSet:
    """Consistent collection: at most one complaint per target id."""

    def __init__(self, complaints: Iterable[Complaint] = ()):
        complaints = tuple(complaints)
        seen: set[int] = set()
        for c in complaints:
            if c.target_id is None:
                continue
            if c.target_id in seen:
                raise InconsistentComplaints(f"two complaints target id {c.target_id}")
            seen.add(c.target_id)
        self.complaints = complaints

    def __iter__(self):
        return iter(self.complaints)

    def __len__(self):
        return len(self.complaints)

    def __eq__(self, other):
        if not isinstance(other, ComplaintSet):
            return NotImplemented
        return sorted(self.complaints, key=_ckey) == sorted(other.complaints, key=_ckey)

    def target_ids(self) -> set[int]:
        return {c.target_id for c in self.complaints if c.target_id is not None}

    def by_target(self) -> dict[int, Complaint]:
        return {c.target_id: c for c in self.complaints if c.target_id is not None}


def _ckey(c: Complaint):
    return (c.target_id is None, c.target_id or 0, c.expected or ())


def apply_complaints(state: Relation, cset: ComplaintSet) -> Relation:
    """Apply every complaint transformation; order-independent by consistency."""
    rows = dict(state.rows)
    next_id = state.max_id()
    for c in sorted(cset.complaints, key=_ckey):
        if c.target_id is not None and c.target_id not in rows and not c.is_deletion:
            # addition of a tuple with a known id
            rows[c.target_id] = TupleRow(c.target_id, tuple(c.expected))
            continue
        if c.target_id is not None:
            if c.target_id not in rows:
                raise UnknownTarget(f"complaint targets absent id {c.target_id}")
            if c.is_deletion:
                del rows[c.target_id]
            else:
                rows[c.target_id] = TupleRow(c.target_id, tuple(c.expected))
        else:
            next_id += 1
            rows[next_id] = TupleRow(next_id, tuple(c.expected))
    return state.with_rows(rows.values())


def diff_states(dirty: Relation, truth: Relation) -> ComplaintSet:
    """Tuple-wise comparison; apply_complaints(dirty, result) == truth."""
    if not dirty.same_schema(truth):
        raise SchemaMismatch(f"{dirty.attr_names} vs {truth.attr_names}")
    out = []
    for rid in sorted(set(dirty.rows) | set(truth.rows)):
        d = dirty.rows.get(rid)
        t = truth.rows.get(rid)
        if d is not None and t is None:
            out.append(Complaint(rid, None))
        elif d is None and t is not None:
            out.append(Complaint(rid, t.values))
        elif d.values != t.values:
            out.append(Complaint(rid, t.values))
    return ComplaintSet(out)


def subsample_complaints(cset: ComplaintSet, keep_fraction: float, seed) -> ComplaintSet:
    """Deterministic seeded subset of round(keep_fraction * n) complaints."""
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction out of [0,1]: {keep_fraction}")
    ordered = sorted(cset.complaints, key=_ckey)
    k = round(keep_fraction * len(ordered))
    rng = random.Random(f"{seed}/subsample")
    return ComplaintSet(sorted(rng.sample(ordered, k), key=_ckey))


# ---------------------------------------------------------------------------
# External formats: CSV states, JSON-Lines complaints


def state_to_csv(state: Relation) -> str:
    buf = io.StringIO()
    buf.write(",".join((ID_ATTR,) + state.attr_names) + "\n")
    for rid in sorted(state.rows):
        row = state.rows[rid]
        buf.write(",".join([str(rid)] + [fmt(v) for v in row.values]) + "\n")
    return buf.getvalue()


def state_from_csv(text: str, domain_hint=None) -> Relation:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaMismatch("empty CSV state")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != ID_ATTR:
        raise SchemaMismatch(f"CSV header must start with {ID_ATTR!r}: {header}")
    schema = tuple(AttrId(i, name) for i, name in enumerate(header[1:]))
    rows = []
    for ln in lines[1:]:
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise SchemaMismatch(f"bad CSV row width: {ln!r}")
        rows.append(TupleRow(int(cells[0]), tuple(fixed(c) for c in cells[1:])))
    return Relation(schema, rows, domain_hint)


def complaints_to_jsonl(cset: ComplaintSet, schema: Sequence[AttrId]) -> str:
    names = [a.name for a in schema]
    lines = []
    for c in sorted(cset.complaints, key=_ckey):
        expected = None
        if c.expected is not None:
            expected = {n: as_float(v) for n, v in zip(names, c.expected)}
        lines.append(json.dumps({"id": c.target_id, "expected": expected}))
    return "\n".join(lines) + ("\n" if lines else "")


def complaints_from_jsonl(
    text: str, schema: Sequence[AttrId], base_state: Optional[Relation] = None
) -> ComplaintSet:
    """Parse complaints; partial `expected` dicts inherit the remaining
    attribute values from `base_state` (the dirty final state)."""
    names = [a.name for a in schema]
    out = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        obj = json.loads(ln)
        expected = obj.get("expected")
        rid = obj.get("id")
        if expected is None:
            out.append(Complaint(rid, None))
            continue
        missing = [n for n in names if n not in expected]
        if missing:
            if base_state is None or rid is None or rid not in base_state.rows:
                raise SchemaMismatch(f"complaint missing attributes {missing}: {ln!r}")
            base = base_state.rows[rid].values
            vals = tuple(
                fixed(expected[n]) if n in expected else base[i] for i, n in enumerate(names)
            )
        else:
            vals = tuple(fixed(expected[n]) for n in names)
        out.append(Complaint(rid, vals))
    return ComplaintSet(out)
