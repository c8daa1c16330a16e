"""Best-bound branch & bound over the binary variables.

Branching picks the most-fractional binary (lowest id on ties); nodes are
explored best-LP-bound first with insertion order as the tie-break, so runs
are deterministic.  At every node a rounding attempt is verified against the
full model; when it succeeds it supplies an incumbent without extra search.
Infeasible is only reported once every branch is closed by infeasibility or
bound, so it is a certificate, not a guess.
"""

from __future__ import annotations

import heapq
import math
import time
from typing import Optional

from .model import MilpModel, Solution, SolveStats, Status, VarKind, check_solution
from .simplex import LpResult, LpStatus, solve_lp


def solve(model: MilpModel, time_limit: Optional[float] = None) -> Solution:
    """Solve a MILP to proven optimality within tolerances."""
    cfg = model.config
    limit = cfg.time_limit_secs if time_limit is None else time_limit
    start = time.monotonic()
    deadline = start + limit
    stats = SolveStats()

    if model.infeasibility_witness is not None:
        stats.wall_secs = time.monotonic() - start
        return Solution(Status.INFEASIBLE, stats=stats)

    binaries = model.binary_ids()
    itol = cfg.integrality_tol

    incumbent: Optional[dict[int, float]] = None
    incumbent_obj = math.inf

    counter = 0
    heap: list[tuple[float, int, dict]] = []

    def push(bound: float, fixes: dict):
        nonlocal counter
        heapq.heappush(heap, (bound, counter, fixes))
        counter += 1

    root = solve_lp(model, None, deadline)
    stats.simplex_iterations += root.iterations
    stats.nodes += 1
    if root.status is LpStatus.INFEASIBLE:
        stats.wall_secs = time.monotonic() - start
        return Solution(Status.INFEASIBLE, stats=stats)
    if root.status in (LpStatus.TIME_LIMIT, LpStatus.ITER_LIMIT):
        stats.wall_secs = time.monotonic() - start
        return Solution(Status.TIMED_OUT, stats=stats)
    if root.status is LpStatus.UNBOUNDED:
        from ..errors import ModelMalformed

        raise ModelMalformed("LP relaxation is unbounded")

    def consider(result: LpResult, fixes: dict) -> Optional[int]:
        """Record incumbents from `result`; return a branch var id or None."""
        nonlocal incumbent, incumbent_obj
        x = result.x
        frac = [
            (abs(x[b] - round(x[b])), b)
            for b in binaries
            if abs(x[b] - round(x[b])) > itol
        ]
        if not frac:
            if result.objective < incumbent_obj - 1e-12:
                incumbent = {v.id: float(x[v.id]) for v in model.vars}
                incumbent_obj = result.objective
            return None
        # rounding attempt: binaries snapped, then re-verified independently
        cand = {v.id: float(x[v.id]) for v in model.vars}
        for b in binaries:
            cand[b] = float(round(cand[b]))
        if not check_solution(model, cand):
            cobj = model.objective_value(cand)
            if cobj < incumbent_obj - 1e-12:
                incumbent = cand
                incumbent_obj = cobj
        dist, var = max((d, -b) for d, b in frac)
        return -var

    branch = consider(root, {})
    if branch is not None:
        for val in (0.0, 1.0):
            push(root.objective, {branch: (val, val)})

    timed_out = False
    while heap:
        if time.monotonic() > deadline:
            timed_out = True
            break
        if cfg.node_limit is not None and stats.nodes >= cfg.node_limit:
            timed_out = True
            break
        bound, _, fixes = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent_obj * (1 - _gap_sign(incumbent_obj) * cfg.rel_gap) - 1e-12:
            continue
        res = solve_lp(model, fixes, deadline)
        stats.nodes += 1
        stats.simplex_iterations += res.iterations
        if res.status is LpStatus.INFEASIBLE:
            continue
        if res.status in (LpStatus.TIME_LIMIT, LpStatus.ITER_LIMIT):
            timed_out = True
            break
        if res.status is LpStatus.UNBOUNDED:
            from ..errors import ModelMalformed

            raise ModelMalformed("LP relaxation is unbounded")
        if incumbent is not None and res.objective >= incumbent_obj - 1e-12:
            continue
        branch = consider(res, fixes)
        if branch is not None:
            for val in (0.0, 1.0):
                child = dict(fixes)
                child[branch] = (val, val)
                push(res.objective, child)

    stats.wall_secs = time.monotonic() - start
    if incumbent is not None:
        status = Status.TIMED_OUT if timed_out else Status.OPTIMAL
        return Solution(status, incumbent, incumbent_obj, stats)
    if timed_out:
        return Solution(Status.TIMED_OUT, stats=stats)
    return Solution(Status.INFEASIBLE, stats=stats)


def _gap_sign(obj: float) -> float:
    return 1.0 if obj >= 0 else -1.0
