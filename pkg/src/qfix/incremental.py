"""Incremental repair: slide a k-query window from newest to oldest.

Each window frees only that batch's constants; the suffix of the log from
the window start onward is encoded (older queries are absorbed into the
replayed start state), so each attempt is a small problem.  The first window
that yields a feasible repair wins, which prioritizes recent corruptions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .encoder import LogEncoder, ModelAudit, RepairResult, RepairScope
from .errors import NoRepairFound
from .milp import Solution, SolverConfig, Status
from .querylog import InsertQuery, QueryLog, run_log
from .relational import ComplaintSet, Relation
from .slicing import build_slice_report, tuple_slice_repair


@dataclass
class IncConfig:
    k: int = 1
    slice_tuples: bool = True
    slice_queries: bool = False
    slice_attrs: bool = False
    single_fault: bool = False
    refine: bool = True
    time_limit_secs: float = 1000.0
    window_floor_secs: float = 5.0
    epsilon: Optional[int] = None  # grid units; None = encoder default
    normalize_objective: bool = True
    solver_config: Optional[SolverConfig] = None


def inc_repair(
    log: QueryLog,
    d0: Relation,
    dn: Relation,
    complaints: ComplaintSet,
    cfg: Optional[IncConfig] = None,
) -> RepairResult:
    """Try windows [q_i .. q_{i+k-1}] newest-first; return the first feasible
    repair (its window indices land in RepairResult.window)."""
    cfg = cfg or IncConfig()
    if cfg.k < 1 or cfg.k > max(len(log), 1):
        raise ValueError(f"batch size k={cfg.k} outside 1..{len(log)}")
    t0 = time.monotonic()
    deadline = t0 + cfg.time_limit_secs

    if len(complaints) == 0:
        return RepairResult(
            log, [], 0.0, Solution(Status.OPTIMAL), ModelAudit(), window=()
        )

    replay = run_log(log, d0)
    report = build_slice_report(log, complaints, dn, cfg.single_fault)
    attr_slice = set(report.relevant_attrs) if cfg.slice_attrs else None
    query_slice = set(report.relevant_queries) if cfg.slice_queries else None

    n = len(log)
    windows = []
    for start in range(n, 0, -cfg.k):
        lo = max(1, start - cfg.k + 1)
        windows.append(tuple(range(lo, start + 1)))

    options = dict(
        normalize_objective=cfg.normalize_objective,
        precomputed_trace=replay,
    )
    if cfg.solver_config is not None:
        options["solver_config"] = cfg.solver_config
    if cfg.epsilon is not None:
        options["epsilon"] = cfg.epsilon

    tried = 0
    for window in windows:
        now = time.monotonic()
        if now > deadline:
            res = RepairResult(log, [], None, Solution(Status.TIMED_OUT), ModelAudit())
            res.window = window
            res.wall_secs = now - t0
            return res
        budget = max(cfg.window_floor_secs, (deadline - now) / max(1, len(windows) - tried))
        tried += 1
        if not _window_viable(log, window, query_slice):
            continue
        scope = RepairScope(frozenset(window))
        start_index = window[0]
        if cfg.slice_tuples:
            res = tuple_slice_repair(
                log, d0, dn, complaints,
                scope=scope,
                refine=cfg.refine,
                attr_slice=attr_slice,
                query_slice=query_slice,
                start_index=start_index,
                time_limit=budget,
                **options,
            )
        else:
            enc = LogEncoder(
                log, d0, dn, complaints,
                scope=scope,
                attr_slice=attr_slice,
                query_slice=query_slice,
                start_index=start_index,
                **options,
            )
            res = enc.repair(budget)
        res.window = window
        last = res
        if res.status in (Status.OPTIMAL, Status.FEASIBLE):
            res.wall_secs = time.monotonic() - t0
            return res
    raise NoRepairFound(
        f"no window of size {cfg.k} admits a structure-preserving repair"
    )


def _window_viable(log: QueryLog, window, query_slice) -> bool:
    """Windows with nothing to repair are infeasible without a solve: no
    numeric literals, or every window query outside the relevant set."""
    has_slot = any(
        slot.location[0] in window for slot in log.slots.values()
    )
    if not has_slot:
        return False
    if query_slice is not None and not (set(window) & query_slice):
        return False
    return True
