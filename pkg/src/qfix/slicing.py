"""Slicing optimizations: fewer tuples, queries, and attributes in the MILP.

Query relevance follows the read-write chains: a query can only matter if
the attributes it can transitively influence overlap the attributes the
complaints identify as wrong.  Tuple slicing encodes only the complaint
tuples, then refines against non-complaint tuples the repair would drag in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .encoder import LogEncoder, RepairResult, RepairScope, manhattan_distance
from .milp import Status
from .querylog import (
    DeleteQuery,
    InsertQuery,
    QueryLog,
    UpdateQuery,
    eval_predicate,
    predicate_attrs,
    run_log,
)
from .relational import ID_ATTR, ComplaintSet, Relation


@dataclass(frozen=True)
class ImpactProfile:
    """Per query: written attrs, read attrs, and transitive influence."""

    direct_impact: tuple[frozenset[str], ...]  # I(q), by query position
    dependency: tuple[frozenset[str], ...]  # P(q)
    full_impact: tuple[frozenset[str], ...]  # F(q)

    def of(self, index: int) -> frozenset[str]:
        return self.full_impact[index - 1]


def direct_impact(q, schema_attrs: Sequence[str]) -> frozenset[str]:
    if isinstance(q, UpdateQuery):
        return frozenset(a for a, _ in q.set_clauses)
    # an insertion or removal touches every attribute, id included
    return frozenset(schema_attrs) | {ID_ATTR}


def dependency(q) -> frozenset[str]:
    # attributes the query reads: condition atoms plus SET expression inputs
    # (the worked full-impact examples require modifier reads to propagate)
    if isinstance(q, UpdateQuery):
        read = set(predicate_attrs(q.where))
        for _, expr in q.set_clauses:
            read |= expr.referenced_attrs()
        return frozenset(read)
    if isinstance(q, DeleteQuery):
        return frozenset(predicate_attrs(q.where))
    return frozenset()


def full_impact(log: QueryLog, index: int, schema_attrs: Sequence[str]) -> frozenset[str]:
    """Forward accumulation: F(q_i) grows by F(q_j) of every later query
    whose predicate reads something F(q_i) already covers."""
    profile = impact_profile(log, schema_attrs)
    return profile.of(index)


def impact_profile(log: QueryLog, schema_attrs: Sequence[str]) -> ImpactProfile:
    n = len(log.queries)
    imp = [direct_impact(q, schema_attrs) for q in log.queries]
    dep = [dependency(q) for q in log.queries]
    full: list[frozenset[str]] = [frozenset()] * n
    for i in range(n - 1, -1, -1):
        acc = set(imp[i])
        for j in range(i + 1, n):
            if acc & dep[j]:
                acc |= full[j]
        full[i] = frozenset(acc)
    return ImpactProfile(tuple(imp), tuple(dep), tuple(full))


def complaint_attrs(complaints: ComplaintSet, dn: Relation) -> frozenset[str]:
    """Attributes some complaint marks as wrong; structural complaints
    (additions/removals) implicate the full schema plus the key."""
    wrong: set[str] = set()
    everything = frozenset(dn.attr_names) | {ID_ATTR}
    for c in complaints:
        if c.expected is None or c.target_id is None or c.target_id not in dn.rows:
            return everything  # deletion or addition complaint
        dirty = dn.rows[c.target_id].values
        for a in dn.schema:
            if dirty[a.index] != c.expected[a.index]:
                wrong.add(a.name)
    return frozenset(wrong)


def relevant_queries(
    log: QueryLog,
    complaints: ComplaintSet,
    dn: Relation,
    single_fault: bool = False,
) -> frozenset[int]:
    attrs = complaint_attrs(complaints, dn)
    if not attrs:
        return frozenset()
    profile = impact_profile(log, dn.attr_names)
    out = set()
    for q in log.queries:
        f = profile.of(q.index)
        if single_fault:
            if f >= attrs:
                out.add(q.index)
        elif f & attrs:
            out.add(q.index)
    return frozenset(out)


def relevant_attrs(log: QueryLog, rel_queries: frozenset[int], schema_attrs) -> frozenset[str]:
    profile = impact_profile(log, schema_attrs)
    out: set[str] = set()
    for idx in rel_queries:
        out |= profile.of(idx)
        out |= profile.dependency[idx - 1]
    return frozenset(out)


@dataclass
class SliceReport:
    complaint_attrs: frozenset[str]
    relevant_queries: frozenset[int]
    relevant_attrs: frozenset[str]
    encoded_tuples: frozenset[int]
    nc: frozenset[int] = frozenset()
    c_plus: frozenset[int] = frozenset()


def build_slice_report(
    log: QueryLog,
    complaints: ComplaintSet,
    dn: Relation,
    single_fault: bool = False,
) -> SliceReport:
    attrs = complaint_attrs(complaints, dn)
    rel_q = relevant_queries(log, complaints, dn, single_fault)
    rel_a = relevant_attrs(log, rel_q, dn.attr_names)
    return SliceReport(attrs, rel_q, rel_a, frozenset(complaints.target_ids()))


def find_nc(
    log_repaired: QueryLog,
    d0: Relation,
    dn: Relation,
    complaints: ComplaintSet,
    repaired_indices: set[int],
) -> frozenset[int]:
    """Non-complaint tuples the repair drags in: tuples whose replayed final
    value changes versus the dirty replay, together with current-state tuples
    now matching a repaired WHERE clause."""
    complained = complaints.target_ids()
    rr = run_log(log_repaired, d0)
    out: set[int] = set()
    for tid in set(rr.final.rows) | set(dn.rows):
        if tid in complained:
            continue
        a = rr.final.rows.get(tid)
        b = dn.rows.get(tid)
        if (a is None) != (b is None) or (a is not None and a.values != b.values):
            out.add(tid)
    idx_map = {a.name: a.index for a in dn.schema}
    for qi in repaired_indices:
        q = log_repaired.query(qi)
        if isinstance(q, InsertQuery):
            continue
        for tid, row in dn.rows.items():
            if tid not in complained and eval_predicate(q.where, row, idx_map):
                out.add(tid)
    return frozenset(out)


def repaired_clause_slots(log: QueryLog, deltas) -> set[int]:
    """Slots of every clause that step 1 actually changed (whole WHERE, the
    single SET expression, or the whole INSERT row)."""
    changed_clauses = set()
    for slot, _, _ in deltas:
        qidx, clause = slot.location[0], slot.location[1]
        if clause == "set":
            changed_clauses.add((qidx, "set", slot.location[2]))
        else:
            changed_clauses.add((qidx, clause))
    out = set()
    for slot in log.slots.values():
        qidx, clause = slot.location[0], slot.location[1]
        key = (qidx, "set", slot.location[2]) if clause == "set" else (qidx, clause)
        if key in changed_clauses:
            out.add(slot.slot_id)
    return out


def tuple_slice_repair(
    log: QueryLog,
    d0: Relation,
    dn: Relation,
    complaints: ComplaintSet,
    scope: Optional[RepairScope] = None,
    *,
    refine: bool = True,
    attr_slice: Optional[set[str]] = None,
    query_slice: Optional[set[int]] = None,
    start_index: int = 1,
    time_limit: Optional[float] = None,
    **options,
) -> RepairResult:
    """Step 1: encode only the complaint tuples.  Step 2: if the repair
    affects non-complaint tuples, re-solve with only the repaired clauses
    free, minimizing how many of those tuples the repair touches."""
    scope = scope or RepairScope.full(log)
    targets = set(complaints.target_ids())
    enc = LogEncoder(
        log,
        d0,
        dn,
        complaints,
        scope=scope,
        tuple_filter=targets,
        attr_slice=attr_slice,
        query_slice=query_slice,
        start_index=start_index,
        **options,
    )
    step1 = enc.repair(time_limit)
    if step1.status not in (Status.OPTIMAL, Status.FEASIBLE) or not refine:
        return step1
    repaired_idx = {slot.location[0] for slot, _, _ in step1.param_deltas}
    if not repaired_idx:
        return step1
    nc = find_nc(step1.repaired_log, d0, dn, complaints, repaired_idx)
    if not nc:
        return step1
    free2 = repaired_clause_slots(log, step1.param_deltas)
    enc2 = LogEncoder(
        log,
        d0,
        dn,
        complaints,
        scope=RepairScope(frozenset(repaired_idx)),
        tuple_filter=targets | set(nc),
        attr_slice=attr_slice,
        query_slice=query_slice,
        start_index=start_index,
        pin_tuples=targets,
        soft_nc=set(nc),
        nc_indicator_queries=repaired_idx,
        free_slot_override=free2,
        **options,
    )
    step2 = enc2.repair(time_limit)
    if step2.status not in (Status.OPTIMAL, Status.FEASIBLE):
        return step1
    step2.objective_value = manhattan_distance(
        step2.param_deltas, options.get("normalize_objective", True)
    )
    step2.window = step1.window
    return step2
