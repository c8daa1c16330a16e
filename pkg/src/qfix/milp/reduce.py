"""Exact pre-solve reduction applied by the repair pipeline.

Repeatedly substitutes variables whose bounds have collapsed (lo == hi) and
absorbs single-variable rows into bounds, so the chains of pinned states and
fixed-parameter queries produced by the encoder fold away before the simplex
ever runs.  Every step is an exact equivalence on the feasible set; the
solver itself performs no reductions (see milp-kernel scope).  Constant rows
that cannot hold yield an infeasibility witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import INF, MilpModel, Solution, Status, VarKind

_FIX_TOL = 1e-9
_CHECK_TOL = 1e-6


@dataclass
class ReducedModel:
    model: Optional[MilpModel]  # None when reduction already proved infeasibility
    fixed: dict[int, float]  # original var id -> value
    var_map: dict[int, int]  # original var id -> reduced var id
    objective_offset: float
    infeasibility_witness: Optional[str] = None

    def recover(self, reduced_assignment: dict[int, float], original: MilpModel) -> dict[int, float]:
        out = dict(self.fixed)
        inv = {new: old for old, new in self.var_map.items()}
        for new_id, val in reduced_assignment.items():
            out[inv[new_id]] = val
        for v in original.vars:
            out.setdefault(v.id, v.lo if v.lo != -INF else 0.0)
        return out


def reduce_model(model: MilpModel) -> ReducedModel:
    n = len(model.vars)
    lo = [v.lo for v in model.vars]
    hi = [v.hi for v in model.vars]
    is_bin = [v.kind is VarKind.BINARY for v in model.vars]
    witness = model.infeasibility_witness

    rows: list[Optional[dict]] = []
    for c in model.constraints:
        terms = {}
        for coeff, vid in c.terms:
            terms[vid] = terms.get(vid, 0.0) + coeff
        rows.append({"terms": terms, "op": c.op, "rhs": c.rhs, "tag": c.tag})

    occurs: list[set[int]] = [set() for _ in range(n)]
    for ri, row in enumerate(rows):
        for vid in row["terms"]:
            occurs[vid].add(ri)

    fixed: dict[int, float] = {}

    def snap_binary(vid):
        nonlocal witness
        l = math.ceil(lo[vid] - _CHECK_TOL)
        h = math.floor(hi[vid] + _CHECK_TOL)
        lo[vid], hi[vid] = float(max(l, 0)), float(min(h, 1))

    def tighten(vid, new_lo=None, new_hi=None, tag=""):
        nonlocal witness
        if new_lo is not None and new_lo > lo[vid]:
            lo[vid] = new_lo
        if new_hi is not None and new_hi < hi[vid]:
            hi[vid] = new_hi
        if is_bin[vid]:
            snap_binary(vid)
        if lo[vid] > hi[vid] + _CHECK_TOL * max(1.0, abs(lo[vid])):
            if witness is None:
                witness = f"bounds of var {model.vars[vid].name} emptied by {tag or 'row'}"
            return
        if hi[vid] - lo[vid] <= _FIX_TOL * max(1.0, abs(lo[vid])) and vid not in fixed:
            val = round((lo[vid] + hi[vid]) / 2.0, 12)
            if is_bin[vid]:
                val = float(round(val))
            fixed[vid] = val
            pending.append(vid)

    pending: list[int] = []
    for vid in range(n):
        tighten(vid)

    def substitute(vid):
        val = fixed[vid]
        for ri in list(occurs[vid]):
            row = rows[ri]
            if row is None:
                continue
            coeff = row["terms"].pop(vid, 0.0)
            row["rhs"] -= coeff * val
            occurs[vid].discard(ri)
            examine(ri)

    def examine(ri):
        nonlocal witness
        row = rows[ri]
        if row is None or witness is not None:
            return
        terms, op, rhs = row["terms"], row["op"], row["rhs"]
        for v in list(terms):
            if v in fixed:
                rhs -= terms.pop(v) * fixed[v]
                occurs[v].discard(ri)
        row["rhs"] = rhs
        if not terms:
            scale = max(1.0, abs(rhs))
            ok = (
                0.0 <= rhs + _CHECK_TOL * scale if op == "<="
                else 0.0 >= rhs - _CHECK_TOL * scale if op == ">="
                else abs(rhs) <= _CHECK_TOL * scale
            )
            if not ok:
                witness = f"constant row {row['tag'] or ri} fails: 0 {op} {rhs}"
            rows[ri] = None
            return
        if len(terms) == 1:
            (vid, coeff), = terms.items()
            val = rhs / coeff
            if op == "=":
                tighten(vid, val, val, row["tag"])
            elif (op == "<=" and coeff > 0) or (op == ">=" and coeff < 0):
                tighten(vid, None, val, row["tag"])
            else:
                tighten(vid, val, None, row["tag"])
            rows[ri] = None
            occurs[vid].discard(ri)

    # seed: absorb every single-var row once, then propagate fixings
    for ri in range(len(rows)):
        examine(ri)
    while pending and witness is None:
        substitute(pending.pop())

    if witness is not None:
        return ReducedModel(None, fixed, {}, 0.0, witness)

    reduced = MilpModel(model.config)
    var_map: dict[int, int] = {}
    for v in model.vars:
        if v.id in fixed:
            continue
        nv = reduced.add_var(v.name, v.kind, lo[v.id], hi[v.id])
        var_map[v.id] = nv.id

    for ri, row in enumerate(rows):
        if row is None or not row["terms"]:
            continue
        reduced.add_constraint(
            [(c, var_map[v]) for v, c in row["terms"].items()],
            row["op"], row["rhs"], row["tag"],
        )

    offset = 0.0
    obj_terms: dict[int, float] = {}
    for coeff, vid in model.objective:
        if vid in fixed:
            offset += coeff * fixed[vid]
        else:
            nv = var_map[vid]
            obj_terms[nv] = obj_terms.get(nv, 0.0) + coeff
    reduced.set_objective([(c, v) for v, c in obj_terms.items()])
    if reduced.infeasibility_witness is not None:
        return ReducedModel(None, fixed, var_map, offset, reduced.infeasibility_witness)
    return ReducedModel(reduced, fixed, var_map, offset)


def solve_reduced(model: MilpModel, time_limit: Optional[float] = None) -> Solution:
    """reduce_model + branch & bound + assignment recovery on the original ids."""
    from .branch_bound import solve

    red = reduce_model(model)
    if red.model is None:
        return Solution(Status.INFEASIBLE)
    sol = solve(red.model, time_limit)
    if sol.status in (Status.OPTIMAL, Status.FEASIBLE) or (
        sol.status is Status.TIMED_OUT and sol.assignment
    ):
        full = red.recover(sol.assignment, model)
        obj = sol.objective_value + red.objective_offset if sol.objective_value is not None else None
        return Solution(sol.status, full, obj, sol.stats)
    return sol
