"""Bounded-variable primal simplex (Bland's rule, two-phase).

Dense numpy tableau for desk-scale models, with a dict-of-rows fallback for
models too large to hold densely (those runs are expected to hit the time
budget; correctness, determinism and clean timeout behaviour matter there,
not speed).  Bland's smallest-index rule makes cycling impossible and the
pivot sequence deterministic.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ModelMalformed
from .model import INF, MilpModel

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_DENSE_CELL_CAP = 40_000_000  # ~320 MB of float64


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time-limit"
    ITER_LIMIT = "iter-limit"


@dataclass
class LpResult:
    status: LpStatus
    x: Optional[np.ndarray]  # structural variable values
    objective: Optional[float]
    iterations: int


_BASIC, _AT_LO, _AT_HI, _FREE = 0, 1, 2, 3


class _DenseTab:
    def __init__(self, rows, n_total):
        self.T = np.zeros((len(rows), n_total))
        for i, row in enumerate(rows):
            for j, coeff in row.items():
                self.T[i, j] = coeff

    def column(self, j):
        return self.T[:, j].copy()

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])

    def reduced_costs(self, cost, basis):
        cb = cost[basis]
        if np.any(cb):
            return cost - cb @ self.T
        return cost.copy()


class _SparseTab:
    def __init__(self, rows, n_total):
        self.rows = [dict(row) for row in rows]
        self.n = n_total

    def column(self, j):
        return np.array([row.get(j, 0.0) for row in self.rows])

    def pivot(self, r, j):
        prow = self.rows[r]
        pj = prow[j]
        prow = {k: v / pj for k, v in prow.items() if v != 0.0}
        self.rows[r] = prow
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row.get(j, 0.0)
            if f == 0.0:
                continue
            for k, v in prow.items():
                nv = row.get(k, 0.0) - f * v
                if abs(nv) < 1e-13:
                    row.pop(k, None)
                else:
                    row[k] = nv
            row.pop(j, None)

    def reduced_costs(self, cost, basis):
        d = cost.copy()
        for i, bi in enumerate(basis):
            cb = cost[bi]
            if cb:
                for k, v in self.rows[i].items():
                    d[k] -= cb * v
        return d


def solve_lp(model: MilpModel,
             bound_overrides: Optional[dict[int, tuple[float, float]]] = None,
             deadline: Optional[float] = None,
             iter_limit: Optional[int] = None) -> LpResult:
    """Solve the LP relaxation of `model` (binaries relaxed to their bounds)."""
    n = len(model.vars)
    lo = np.array([v.lo for v in model.vars])
    hi = np.array([v.hi for v in model.vars])
    if bound_overrides:
        for vid, (l, h) in bound_overrides.items():
            lo[vid], hi[vid] = l, h
    if np.any(lo > hi):
        return LpResult(LpStatus.INFEASIBLE, None, None, 0)

    m = len(model.constraints)
    cost = np.zeros(n)
    for coeff, vid in model.objective:
        cost[vid] += coeff

    if m == 0:
        x = _initial_point(lo, hi, cost)
        return LpResult(LpStatus.OPTIMAL, x, float(cost @ x), 0)

    # rows scaled by their largest |coefficient| for conditioning
    rows = []
    b = np.zeros(m)
    slack_lo, slack_hi = [], []
    for i, c in enumerate(model.constraints):
        scale = max(abs(co) for co, _ in c.terms)
        scale = scale if scale > 0 else 1.0
        row = {}
        for coeff, vid in c.terms:
            row[vid] = row.get(vid, 0.0) + coeff / scale
        row[n + i] = 1.0
        rows.append(row)
        b[i] = c.rhs / scale
        if c.op == "<=":
            slack_lo.append(0.0), slack_hi.append(INF)
        elif c.op == ">=":
            slack_lo.append(-INF), slack_hi.append(0.0)
        else:
            slack_lo.append(0.0), slack_hi.append(0.0)

    n_slack = m
    n_total = n + n_slack + m  # artificials at the tail
    lo_all = np.concatenate([lo, slack_lo, np.zeros(m)])
    hi_all = np.concatenate([hi, slack_hi, np.zeros(m)])
    cost_all = np.concatenate([cost, np.zeros(n_slack + m)])

    x_nb = _initial_point(lo_all[: n + n_slack], hi_all[: n + n_slack], None)
    resid = b - _apply_rows(rows, x_nb)
    phase1_cost = np.zeros(n_total)
    for i in range(m):
        aid = n + n_slack + i
        rows[i][aid] = 1.0
        if resid[i] >= 0:
            lo_all[aid], hi_all[aid] = 0.0, INF
            phase1_cost[aid] = 1.0
        else:
            lo_all[aid], hi_all[aid] = -INF, 0.0
            phase1_cost[aid] = -1.0

    dense = m * n_total <= _DENSE_CELL_CAP
    tab = (_DenseTab if dense else _SparseTab)(rows, n_total)

    status = np.full(n_total, _AT_LO, dtype=np.int8)
    for j in range(n + n_slack):
        if lo_all[j] == -INF and hi_all[j] == INF:
            status[j] = _FREE
        elif lo_all[j] == -INF:
            status[j] = _AT_HI
    basis = np.arange(n + n_slack, n_total)
    status[basis] = _BASIC
    xB = resid.copy()
    xval = np.concatenate([x_nb, np.zeros(m)])

    budget = iter_limit if iter_limit is not None else max(20000, 60 * (m + n))
    iters = 0

    def run_phase(costvec):
        nonlocal iters
        while True:
            if deadline is not None and iters % 32 == 0 and time.monotonic() > deadline:
                return LpStatus.TIME_LIMIT
            if iters >= budget:
                return LpStatus.ITER_LIMIT
            d = tab.reduced_costs(costvec, basis)
            enter, direction = -1, 0
            for j in range(n_total):
                if status[j] == _BASIC:
                    continue
                if (status[j] in (_AT_LO, _FREE)) and d[j] < -_COST_TOL:
                    enter, direction = j, 1
                    break
                if (status[j] in (_AT_HI, _FREE)) and d[j] > _COST_TOL:
                    enter, direction = j, -1
                    break
            if enter < 0:
                return LpStatus.OPTIMAL
            y = tab.column(enter)
            # step t >= 0 moves x_enter by direction*t and xB by -direction*t*y
            t_best = hi_all[enter] - lo_all[enter] if status[enter] != _FREE else INF
            leave_row = -1
            leave_to = _AT_LO
            for i in range(m):
                dy = -direction * y[i]
                if dy > _PIVOT_TOL:
                    room, to = hi_all[basis[i]] - xB[i], _AT_HI
                elif dy < -_PIVOT_TOL:
                    room, to, dy = xB[i] - lo_all[basis[i]], _AT_LO, -dy
                else:
                    continue
                if room == INF:
                    continue
                t = max(room, 0.0) / dy
                if t < t_best - 1e-12 or (
                    t_best != INF
                    and t <= t_best + 1e-12
                    and (leave_row < 0 or basis[i] < basis[leave_row])
                ):
                    t_best, leave_row, leave_to = t, i, to
            if t_best == INF:
                return LpStatus.UNBOUNDED
            iters += 1
            xB[:] = xB - direction * t_best * y
            if leave_row < 0:
                # bound flip: entering travels to its other bound
                status[enter] = _AT_HI if direction == 1 else _AT_LO
                xval[enter] = hi_all[enter] if direction == 1 else lo_all[enter]
                continue
            if status[enter] == _FREE:
                entering_val = xval[enter] + direction * t_best
            elif status[enter] == _AT_LO:
                entering_val = lo_all[enter] + direction * t_best
            else:
                entering_val = hi_all[enter] + direction * t_best
            leaving = basis[leave_row]
            status[leaving] = leave_to
            xval[leaving] = lo_all[leaving] if leave_to == _AT_LO else hi_all[leaving]
            tab.pivot(leave_row, enter)
            basis[leave_row] = enter
            status[enter] = _BASIC
            xB[leave_row] = entering_val

    st = run_phase(phase1_cost)
    if st is not LpStatus.OPTIMAL:
        return LpResult(st, None, None, iters)
    full = xval.copy()
    for i, j in enumerate(basis):
        full[j] = xB[i]
    if float(phase1_cost @ full) > 1e-6:
        return LpResult(LpStatus.INFEASIBLE, None, None, iters)
    # artificials are pinned at zero for phase 2 (basic ones stay at 0)
    lo_all[n + n_slack:] = 0.0
    hi_all[n + n_slack:] = 0.0
    st = run_phase(cost_all)
    if st is not LpStatus.OPTIMAL:
        return LpResult(st, None, None, iters)

    full = xval.copy()
    for i, j in enumerate(basis):
        full[j] = xB[i]
    x = full[:n]
    return LpResult(LpStatus.OPTIMAL, x, float(cost @ x), iters)


def _apply_rows(rows, x) -> np.ndarray:
    out = np.zeros(len(rows))
    nx = len(x)
    for i, row in enumerate(rows):
        out[i] = sum(coeff * x[j] for j, coeff in row.items() if j < nx)
    return out


def _initial_point(lo, hi, cost) -> np.ndarray:
    x = np.zeros(len(lo))
    for j in range(len(lo)):
        if lo[j] == -INF and hi[j] == INF:
            x[j] = 0.0
        elif lo[j] == -INF:
            x[j] = hi[j]
        else:
            x[j] = lo[j]
    if cost is not None:
        # a model with no rows: put each var at its cheapest bound
        for j in range(len(lo)):
            if cost[j] < 0 and hi[j] != INF:
                x[j] = hi[j]
            elif cost[j] > 0 and lo[j] != -INF:
                x[j] = lo[j]
            elif (cost[j] < 0 and hi[j] == INF) or (cost[j] > 0 and lo[j] == -INF):
                raise ModelMalformed("objective is unbounded over the variable bounds")
    return x
