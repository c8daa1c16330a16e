"""MILP model container, solver configuration, and solution checking.

The verifier (`check_solution`) is intentionally dumb: it substitutes an
assignment into every stored constraint and bound, sharing no code with the
simplex, so it can certify solver output independently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..errors import ModelMalformed

INF = math.inf


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class VarRef:
    id: int
    name: str
    kind: VarKind
    lo: float
    hi: float


@dataclass(frozen=True)
class LinConstraint:
    terms: tuple[tuple[float, int], ...]  # (coefficient, var id)
    op: str  # '<=', '=', '>='
    rhs: float
    tag: str = ""


@dataclass
class SolverConfig:
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    rel_gap: float = 1e-6
    time_limit_secs: float = 1000.0
    node_limit: Optional[int] = None


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


@dataclass
class SolveStats:
    nodes: int = 0
    simplex_iterations: int = 0
    wall_secs: float = 0.0


@dataclass
class Solution:
    status: Status
    assignment: dict[int, float] = field(default_factory=dict)
    objective_value: Optional[float] = None
    stats: SolveStats = field(default_factory=SolveStats)


class MilpModel:
    def __init__(self, config: Optional[SolverConfig] = None):
        self.vars: list[VarRef] = []
        self.constraints: list[LinConstraint] = []
        self.objective: list[tuple[float, int]] = []  # minimize
        self.config = config or SolverConfig()
        self._names: set[str] = set()
        self.infeasibility_witness: Optional[str] = None  # set when a build-time
        # contradiction between constants already proves the model infeasible

    def add_var(self, name: str, kind: VarKind = VarKind.CONTINUOUS,
                lo: float = 0.0, hi: float = INF) -> VarRef:
        if name in self._names:
            raise ModelMalformed(f"duplicate variable name {name!r}")
        if kind is VarKind.BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi:
            raise ModelMalformed(f"variable {name!r} has empty bounds [{lo}, {hi}]")
        v = VarRef(len(self.vars), name, kind, float(lo), float(hi))
        self.vars.append(v)
        self._names.add(name)
        return v

    def add_constraint(self, terms: Iterable[tuple[float, VarRef | int]], op: str,
                       rhs: float, tag: str = "") -> LinConstraint:
        if op not in ("<=", "=", ">="):
            raise ModelMalformed(f"bad constraint op {op!r}")
        norm = []
        for coeff, var in terms:
            vid = var.id if isinstance(var, VarRef) else var
            if not (0 <= vid < len(self.vars)):
                raise ModelMalformed(f"constraint references unknown var {vid}")
            if not math.isfinite(coeff):
                raise ModelMalformed(f"non-finite coefficient in {tag!r}")
            if coeff != 0.0:
                norm.append((float(coeff), vid))
        if not norm:
            # constant row: either trivially true or a proof of infeasibility
            if not _const_row_holds(op, rhs):
                self.mark_infeasible(tag or f"constant row 0 {op} {rhs}")
            return LinConstraint((), op, float(rhs), tag)
        c = LinConstraint(tuple(norm), op, float(rhs), tag)
        self.constraints.append(c)
        return c

    def set_objective(self, terms: Iterable[tuple[float, VarRef | int]]):
        self.objective = []
        for coeff, var in terms:
            vid = var.id if isinstance(var, VarRef) else var
            if not (0 <= vid < len(self.vars)):
                raise ModelMalformed(f"objective references unknown var {vid}")
            if coeff != 0.0:
                self.objective.append((float(coeff), vid))

    def add_objective_term(self, coeff: float, var: VarRef):
        if coeff != 0.0:
            self.objective.append((float(coeff), var.id))

    def mark_infeasible(self, witness: str):
        if self.infeasibility_witness is None:
            self.infeasibility_witness = witness

    def binary_ids(self) -> list[int]:
        return [v.id for v in self.vars if v.kind is VarKind.BINARY]

    def objective_value(self, assignment: dict[int, float]) -> float:
        return sum(c * assignment.get(vid, 0.0) for c, vid in self.objective)

    def var_by_name(self, name: str) -> VarRef:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)


def _const_row_holds(op: str, rhs: float, tol: float = 1e-9) -> bool:
    if op == "<=":
        return 0.0 <= rhs + tol
    if op == ">=":
        return 0.0 >= rhs - tol
    return abs(rhs) <= tol


def check_solution(model: MilpModel, assignment: dict[int, float],
                   feasibility_tol: Optional[float] = None,
                   integrality_tol: Optional[float] = None) -> list[str]:
    """Independent verification by direct substitution; returns violations."""
    ftol = model.config.feasibility_tol if feasibility_tol is None else feasibility_tol
    itol = model.config.integrality_tol if integrality_tol is None else integrality_tol
    # scale tolerance mildly with row magnitude so big-M rows are not judged
    # more harshly than the arithmetic that produced them
    problems = []
    for v in model.vars:
        x = assignment.get(v.id, 0.0)
        if x < v.lo - ftol * max(1.0, abs(v.lo)) or x > v.hi + ftol * max(1.0, abs(v.hi)):
            problems.append(f"var {v.name} = {x} outside [{v.lo}, {v.hi}]")
        if v.kind is VarKind.BINARY and abs(x - round(x)) > itol:
            problems.append(f"binary {v.name} = {x} not integral")
    for c in model.constraints:
        lhs = sum(coeff * assignment.get(vid, 0.0) for coeff, vid in c.terms)
        scale = max(1.0, abs(c.rhs), *(abs(co) for co, _ in c.terms))
        slack = ftol * scale
        ok = (
            lhs <= c.rhs + slack if c.op == "<="
            else lhs >= c.rhs - slack if c.op == ">="
            else abs(lhs - c.rhs) <= slack
        )
        if not ok:
            problems.append(f"row {c.tag or c.terms}: {lhs} {c.op} {c.rhs} violated")
    return problems
