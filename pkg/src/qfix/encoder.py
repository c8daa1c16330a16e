"""Translate (log, D_0, D_n, complaints) into a MILP and back into a repair.

Each encoded (query, tuple) pair contributes an indicator binary per
predicate node plus the two-variable product linearization for every written
attribute; query constants inside the repair window become free parameter
variables tied to the Manhattan objective.  Initial-state values are inlined
as constants, final-state values of pinned tuples become equality rows, and
chaining is by construction: the output entry of one query is the input
entry of the next.

Queries outside the encoded-block set (query slicing) are replay-followed
exactly; queries with fixed parameters still produce blocks, but their
indicator bounds are fixed from replayed constants so the whole chain folds
away in the reduction pass before the solver runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import BilinearTerm, DirtyReplayMismatch, UnknownComplaintTarget
from .milp import MilpModel, Solution, SolverConfig, Status, VarKind, VarRef, export_lp
from .milp.reduce import reduce_model
from .milp import branch_bound
from .querylog import (
    Atom,
    BoolNode,
    DeleteQuery,
    InsertQuery,
    Lit,
    ParamKind,
    ParamSlot,
    QueryLog,
    TRUE,
    UpdateQuery,
    eval_predicate,
    run_log,
)
from .relational import ID_ATTR, Complaint, ComplaintSet, Relation
from .values import SCALE, Value, as_float, fixed, fmt, fmul, from_float


@dataclass(frozen=True)
class RepairScope:
    """Query indices whose parameter slots become free variables."""

    repair_window: frozenset[int]

    @classmethod
    def full(cls, log: QueryLog) -> "RepairScope":
        return cls(frozenset(q.index for q in log.queries))

    @classmethod
    def of(cls, *indices: int) -> "RepairScope":
        return cls(frozenset(indices))


@dataclass
class ModelAudit:
    binaries: int = 0
    variables: int = 0
    constraints: int = 0
    encoded_pairs: int = 0
    encoded_tuples: int = 0
    reduced_variables: int = 0
    reduced_constraints: int = 0


@dataclass
class RepairResult:
    repaired_log: QueryLog
    param_deltas: list[tuple[ParamSlot, Value, Value]]  # (slot, old, new)
    objective_value: Optional[float]
    solution: Solution
    audit: ModelAudit
    skipped_slots: list[tuple[int, str]] = field(default_factory=list)
    window: Optional[tuple[int, ...]] = None
    verified: bool = True
    wall_secs: float = 0.0

    @property
    def status(self) -> Status:
        return self.solution.status


class _Bilinear(BilinearTerm):
    """A free coefficient slot multiplies an undetermined attribute variable;
    `repair()` catches this and demotes the slot to its fixed value."""

    def __init__(self, slot_id: int, why: str):
        super().__init__(why)
        self.slot_id = slot_id
        self.why = why


class EncodingContext:
    """Big-M constants, entry tables, indicator/parameter variable registries."""

    def __init__(self, log: QueryLog, d0: Relation, trace, epsilon: Value):
        hi = max((h for _, h in d0.domain_hint), default=0)
        hi = max(hi, 0)
        for state in trace:
            for row in state.rows.values():
                for v in row.values:
                    hi = max(hi, abs(v))
            hi = max(hi, state.max_id() * SCALE)
        for slot in log.slots.values():
            hi = max(hi, abs(slot.original_value))
        self.big_m: Value = hi + SCALE  # one whole unit above anything observed
        self.delete_sentinel: Value = self.big_m + SCALE
        self.epsilon: Value = epsilon
        # (tuple id, attr) -> current entry: fixed-int constant or VarRef
        self.entries: dict[tuple[int, str], object] = {}
        self.indicators: dict[tuple[int, int], VarRef] = {}  # (query idx, tuple id)
        self.param_vars: dict[int, VarRef] = {}
        self.insert_choice: dict[tuple[int, int], VarRef] = {}  # (query idx, attr pos) -> v_free


def _is_const(entry) -> bool:
    return isinstance(entry, int)


class LogEncoder:
    """One encoding job; see `basic_repair` for the packaged entry point."""

    def __init__(
        self,
        log: QueryLog,
        d0: Relation,
        dn: Relation,
        complaints: ComplaintSet,
        *,
        scope: Optional[RepairScope] = None,
        tuple_filter: Optional[set[int]] = None,
        attr_slice: Optional[set[str]] = None,
        query_slice: Optional[set[int]] = None,
        start_index: int = 1,
        pin_tuples: Optional[set[int]] = None,
        soft_nc: Optional[set[int]] = None,
        nc_indicator_queries: Optional[set[int]] = None,
        epsilon: Value = fixed("0.001"),
        normalize_objective: bool = True,
        solver_config: Optional[SolverConfig] = None,
        precomputed_trace=None,
        free_slot_override: Optional[set[int]] = None,
    ):
        self.log = log
        self.d0 = d0
        self.dn = dn
        self.complaints = complaints
        self.scope = scope or RepairScope.full(log)
        self.tuple_filter = tuple_filter
        self.attr_slice = attr_slice
        self.query_slice = query_slice
        self.start_index = start_index
        self.pin_tuples = pin_tuples
        self.soft_nc = soft_nc or set()
        self.nc_indicator_queries = nc_indicator_queries or set(self.scope.repair_window)
        self.epsilon = epsilon
        self.normalize = normalize_objective
        self.config = solver_config or SolverConfig()
        self.free_slot_override = free_slot_override

        self.replay = precomputed_trace or run_log(log, d0)
        if self.replay.final != dn:
            raise DirtyReplayMismatch(
                "replaying the log from D_0 does not reproduce the given final state"
            )
        self.schema_attrs = list(d0.attr_names)
        self.attr_pos = {a.name: a.index for a in d0.schema}
        by_target = complaints.by_target()
        for c in complaints:
            if c.target_id is None:
                raise UnknownComplaintTarget(
                    "addition complaints must carry an id to be encodable"
                )
        self.complaint_map: dict[int, Complaint] = by_target

    # -- public build/solve ---------------------------------------------------

    def repair(self, time_limit: Optional[float] = None) -> RepairResult:
        t0 = time.monotonic()
        free = self._initial_free_slots()
        skipped: list[tuple[int, str]] = []
        while True:
            try:
                model, audit = self.build(free)
                break
            except _Bilinear as bl:
                free.discard(bl.slot_id)
                skipped.append((bl.slot_id, bl.why))
        limit = self.config.time_limit_secs if time_limit is None else time_limit
        solution, audit = self._solve(model, audit, limit)
        result = self._extract(free, solution, audit, skipped)
        result.wall_secs = time.monotonic() - t0
        return result

    def build_model(self, time_limit: Optional[float] = None):
        """Model + audit for export; same demotion loop as repair()."""
        free = self._initial_free_slots()
        while True:
            try:
                return self.build(free)
            except _Bilinear as bl:
                free.discard(bl.slot_id)

    def _solve(self, model: MilpModel, audit: ModelAudit, limit: float):
        red = reduce_model(model)
        if red.model is None:
            return Solution(Status.INFEASIBLE), audit
        audit.reduced_variables = len(red.model.vars)
        audit.reduced_constraints = len(red.model.constraints)
        sol = branch_bound.solve(red.model, limit)
        if sol.assignment:
            full = red.recover(sol.assignment, model)
            obj = sol.objective_value
            if obj is not None:
                obj += red.objective_offset
            sol = Solution(sol.status, full, obj, sol.stats)
        return sol, audit

    # -- slot freedom ---------------------------------------------------------

    def _initial_free_slots(self) -> set[int]:
        if self.free_slot_override is not None:
            return set(self.free_slot_override)
        free = set()
        for slot in self.log.slots.values():
            qidx = slot.location[0]
            if qidx in self.scope.repair_window and qidx >= self.start_index:
                free.add(slot.slot_id)
        return free

    # -- whole-model build ----------------------------------------------------

    def build(self, free_slots: set[int]):
        self.free_slots = free_slots
        model = MilpModel(self.config)
        self.model = model
        ctx = EncodingContext(self.log, self.d0, self.replay.trace, self.epsilon)
        self.ctx = ctx
        self._uid = 0
        audit = ModelAudit()
        self.audit = audit

        initial = self.replay.trace[self.start_index - 1]
        universe = set(initial.rows)
        for qidx, tid in self.replay.inserted_ids.items():
            if qidx >= self.start_index:
                universe.add(tid)
        ever_existed = set(self.d0.rows) | set(self.replay.inserted_ids.values())
        for tid, c in self.complaint_map.items():
            if self.tuple_filter is not None and tid not in self.tuple_filter:
                continue
            if tid in universe:
                continue
            if tid not in ever_existed:
                raise UnknownComplaintTarget(f"complaint targets unknown id {tid}")
            # existed once but is gone before the encoded suffix begins
            if c.expected is not None:
                model.mark_infeasible(f"tuple {tid} no longer exists at the window start")
        if self.tuple_filter is not None:
            universe &= self.tuple_filter
        self.universe = universe
        audit.encoded_tuples = len(universe)

        enc_attrs = list(self.schema_attrs)
        if self.attr_slice is not None:
            enc_attrs = [a for a in self.schema_attrs if a in self.attr_slice]
        self.enc_attrs = enc_attrs

        alive: set[int] = set()
        for tid in sorted(universe & set(initial.rows)):
            row = initial.rows[tid]
            ctx.entries[(tid, ID_ATTR)] = tid * SCALE
            for a in enc_attrs:
                ctx.entries[(tid, a)] = row.values[self.attr_pos[a]]
            alive.add(tid)

        blocks = self.query_slice
        for q in self.log.queries[self.start_index - 1 :]:
            in_block = blocks is None or q.index in blocks or q.index in self.scope.repair_window
            if isinstance(q, InsertQuery):
                self.encode_insert(q, alive, in_block)
            elif isinstance(q, UpdateQuery):
                self._each_tuple(q, alive, in_block, self.encode_update)
            else:
                self._each_tuple(q, alive, in_block, self.encode_delete)

        self.assign_vals()
        self.encode_objective(free_slots)

        audit.variables = len(model.vars)
        audit.binaries = len(model.binary_ids())
        audit.constraints = len(model.constraints)
        return model, audit

    def _each_tuple(self, q, alive: set[int], in_block: bool, fn):
        for tid in sorted(alive):
            fn(q, tid, in_block)

    def _name(self, stem: str) -> str:
        self._uid += 1
        return f"{stem}__{self._uid}"

    def _var(self, stem, lo, hi, kind=VarKind.CONTINUOUS) -> VarRef:
        return self.model.add_var(self._name(stem), kind, lo, hi)

    # -- parameters -----------------------------------------------------------

    def _param_var(self, slot: ParamSlot) -> VarRef:
        v = self.ctx.param_vars.get(slot.slot_id)
        if v is None:
            m = as_float(self.ctx.big_m)
            v = self._var(f"p_{slot.kind.value}_{slot.slot_id}", -m, m)
            self.ctx.param_vars[slot.slot_id] = v
        return v

    def _lit(self, lit: Lit):
        """A literal is a free parameter variable or a fixed constant."""
        if lit.slot_id is not None and lit.slot_id in self.free_slots:
            return self._param_var(self.log.slots[lit.slot_id])
        return lit.value

    # -- linear expressions over entries --------------------------------------

    def _expr(self, e, tid: int):
        """LinExpr -> (terms [(coeff_float, var)], const_fixed, lo, hi).

        Raises _Bilinear when a free coefficient multiplies a variable entry.
        """
        terms: list[tuple[float, VarRef]] = []
        const: Value = 0
        lo = hi = 0.0
        for t in e.terms:
            entry = self.ctx.entries[(tid, t.attr)]
            coeff = self._lit(t.coeff)
            if isinstance(coeff, VarRef):
                if not _is_const(entry):
                    raise _Bilinear(
                        t.coeff.slot_id,
                        f"coefficient multiplies undetermined {t.attr} of tuple {tid}",
                    )
                scalar = as_float(entry)
                terms.append((scalar, coeff))
                lo += min(scalar * coeff.lo, scalar * coeff.hi)
                hi += max(scalar * coeff.lo, scalar * coeff.hi)
            elif _is_const(entry):
                const += fmul(coeff, entry)
                lo += as_float(fmul(coeff, entry))
                hi += as_float(fmul(coeff, entry))
            else:
                c = as_float(coeff)
                terms.append((c, entry))
                lo += min(c * entry.lo, c * entry.hi)
                hi += max(c * entry.lo, c * entry.hi)
        cl = self._lit(e.const)
        if isinstance(cl, VarRef):
            terms.append((1.0, cl))
            lo += cl.lo
            hi += cl.hi
        else:
            const += cl
            lo += as_float(cl)
            hi += as_float(cl)
        return terms, const, lo, hi

    def _expr_is_const(self, e, tid: int) -> bool:
        for t in e.terms:
            if not _is_const(self.ctx.entries[(tid, t.attr)]):
                return False
            if t.coeff.slot_id in self.free_slots:
                return False
        return e.const.slot_id not in self.free_slots

    def _eval_const_expr(self, e, tid: int) -> Value:
        total = e.const.value
        for t in e.terms:
            total += fmul(t.coeff.value, self.ctx.entries[(tid, t.attr)])
        return total

    # -- predicates (Eq. 1) ---------------------------------------------------

    def encode_predicate(self, pred, qidx: int, tid: int) -> VarRef:
        """Indicator binary equal (within epsilon semantics) to sigma(t)."""
        x = self._pred_node(pred, qidx, tid, top=True)
        self.ctx.indicators[(qidx, tid)] = x
        return x

    def _pred_node(self, pred, qidx, tid, top=False) -> VarRef:
        if pred is TRUE:
            return self._var(f"x_q{qidx}_t{tid}", 1.0, 1.0, VarKind.BINARY)
        if isinstance(pred, Atom):
            b = self._atom(pred, qidx, tid)
            if not top:
                return b
            root = self._var(f"x_q{qidx}_t{tid}", b.lo, b.hi, VarKind.BINARY)
            self.model.add_constraint([(1.0, root), (-1.0, b)], "=", 0.0, f"root_q{qidx}_t{tid}")
            return root
        children = [self._pred_node(c, qidx, tid) for c in pred.children]
        lo = hi = None
        if all(c.lo == c.hi for c in children):
            vals = [c.lo for c in children]
            truth = all(v > 0.5 for v in vals) if pred.kind == "and" else any(v > 0.5 for v in vals)
            lo = hi = 1.0 if truth else 0.0
        stem = f"x_q{qidx}_t{tid}" if top else f"nb_q{qidx}_t{tid}"
        a = self._var(stem, 0.0 if lo is None else lo, 1.0 if hi is None else hi, VarKind.BINARY)
        n = len(children)
        if pred.kind == "and":
            for c in children:
                self.model.add_constraint([(1.0, a), (-1.0, c)], "<=", 0.0, "and_le")
            self.model.add_constraint(
                [(1.0, a)] + [(-1.0, c) for c in children], ">=", -(n - 1), "and_ge"
            )
        else:
            for c in children:
                self.model.add_constraint([(1.0, a), (-1.0, c)], ">=", 0.0, "or_ge")
            self.model.add_constraint(
                [(1.0, a)] + [(-1.0, c) for c in children], "<=", 0.0, "or_le"
            )
        return a

    def _atom(self, atom: Atom, qidx, tid) -> VarRef:
        if atom.op == "=":
            # two-sided band |e - c| <= eps/2, as a conjunction of two atoms
            half = self.epsilon // 2
            b_ge = self._atom_rows(atom, qidx, tid, ">=", -half)
            b_le = self._atom_rows(atom, qidx, tid, "<=", half)
            fixed = b_ge.lo == b_ge.hi and b_le.lo == b_le.hi
            both = min(b_ge.hi, b_le.hi)
            a = self._var(
                f"nb_q{qidx}_t{tid}",
                both if fixed else 0.0,
                both if fixed else 1.0,
                VarKind.BINARY,
            )
            self.model.add_constraint([(1.0, a), (-1.0, b_ge)], "<=", 0.0, "eq_and")
            self.model.add_constraint([(1.0, a), (-1.0, b_le)], "<=", 0.0, "eq_and")
            self.model.add_constraint(
                [(1.0, a), (-1.0, b_ge), (-1.0, b_le)], ">=", -1.0, "eq_and"
            )
            return a
        return self._atom_rows(atom, qidx, tid, atom.op, 0)

    def _atom_rows(self, atom: Atom, qidx, tid, op: str, rhs_shift: Value) -> VarRef:
        terms, const, lo, hi = self._expr(atom.lhs, tid)
        rhs = self._lit(atom.rhs)
        eps = as_float(self.epsilon)
        shift = as_float(rhs_shift)
        # diff = lhs - rhs - shift, with interval [dlo, dhi]
        diff_terms = list(terms)
        if isinstance(rhs, VarRef):
            diff_terms.append((-1.0, rhs))
            dlo = lo + as_float(const) - rhs.hi - shift
            dhi = hi + as_float(const) - rhs.lo - shift
            diff_rhs = -as_float(const) + shift
        else:
            dlo = lo + as_float(const) - as_float(rhs) - shift
            dhi = hi + as_float(const) - as_float(rhs) - shift
            diff_rhs = as_float(rhs) - as_float(const) + shift
            if not diff_terms:
                # everything constant: evaluate exactly on the fixed grid
                target = rhs + rhs_shift
                truth = {
                    "<": const < target,
                    "<=": const <= target,
                    ">=": const >= target,
                    ">": const > target,
                }[op]
                val = 1.0 if truth else 0.0
                return self._var(f"atom_q{qidx}_t{tid}", val, val, VarKind.BINARY)
        b = self._var(f"atom_q{qidx}_t{tid}", 0.0, 1.0, VarKind.BINARY)
        # strictness: >= keeps the true side closed; > opens it by eps, etc.
        if op in (">=", ">"):
            on_gap = eps if op == ">" else 0.0
            off_gap = 0.0 if op == ">" else eps
            m1 = max(0.0, on_gap - dlo) + 1.0
            self.model.add_constraint(
                diff_terms + [(-m1, b)], ">=", diff_rhs + on_gap - m1, f"ge_on_q{qidx}_t{tid}"
            )
            m2 = max(0.0, dhi + off_gap) + 1.0
            self.model.add_constraint(
                diff_terms + [(-m2, b)], "<=", diff_rhs - off_gap, f"ge_off_q{qidx}_t{tid}"
            )
        else:
            on_gap = eps if op == "<" else 0.0
            off_gap = 0.0 if op == "<" else eps
            m1 = max(0.0, dhi + on_gap) + 1.0
            self.model.add_constraint(
                diff_terms + [(m1, b)], "<=", diff_rhs - on_gap + m1, f"le_on_q{qidx}_t{tid}"
            )
            m2 = max(0.0, off_gap - dlo) + 1.0
            self.model.add_constraint(
                diff_terms + [(m2, b)], ">=", diff_rhs + off_gap, f"le_off_q{qidx}_t{tid}"
            )
        return b

    # -- product linearization (Eq. 3) ----------------------------------------

    def _product_pair(self, qidx, tid, attr, x: VarRef, mu_terms, mu_const, mu_lo, mu_hi):
        """out = x * mu + (1 - x) * old  via the six u/v rows."""
        old = self.ctx.entries[(tid, attr)]
        sent = as_float(self.ctx.delete_sentinel)
        mu_hi_b = max(mu_hi, 0.0)
        u = self._var(f"u_q{qidx}_t{tid}_{attr}", 0.0, mu_hi_b)
        mc = as_float(mu_const)
        mm = mu_hi_b + 1.0
        self.model.add_constraint(
            [(1.0, u)] + [(-c, v) for c, v in mu_terms], "<=", mc, "u_le_mu"
        )
        self.model.add_constraint([(1.0, u), (-mm, x)], "<=", 0.0, "u_le_xm")
        self.model.add_constraint(
            [(1.0, u)] + [(-c, v) for c, v in mu_terms] + [(-mm, x)], ">=", mc - mm, "u_ge"
        )
        if _is_const(old):
            old_f = as_float(old)
            vv = self._var(f"v_q{qidx}_t{tid}_{attr}", 0.0, max(old_f, 0.0))
            vm = max(old_f, 0.0) + 1.0
            self.model.add_constraint([(1.0, vv)], "<=", old_f, "v_le_t")
            self.model.add_constraint([(1.0, vv), (vm, x)], "<=", vm, "v_le_xm")
            self.model.add_constraint([(1.0, vv), (vm, x)], ">=", old_f, "v_ge")
        else:
            vv = self._var(f"v_q{qidx}_t{tid}_{attr}", 0.0, old.hi)
            vm = old.hi + 1.0
            self.model.add_constraint([(1.0, vv), (-1.0, old)], "<=", 0.0, "v_le_t")
            self.model.add_constraint([(1.0, vv), (vm, x)], "<=", vm, "v_le_xm")
            self.model.add_constraint(
                [(1.0, vv), (-1.0, old), (vm, x)], ">=", 0.0 - vm, "v_ge"
            )
        out_hi = mu_hi_b + (as_float(old) if _is_const(old) else old.hi)
        out = self._var(f"t_q{qidx}_t{tid}_{attr}", 0.0, min(out_hi, sent))
        self.model.add_constraint(
            [(1.0, out), (-1.0, u), (-1.0, vv)], "=", 0.0, "out_sum"
        )
        self.ctx.entries[(tid, attr)] = out

    # -- query encoders --------------------------------------------------------

    def _sigma_is_const(self, q, tid) -> bool:
        pred = q.where
        for atom in _atoms(pred):
            if not self._expr_is_const(atom.lhs, tid):
                return False
            if atom.rhs.slot_id in self.free_slots:
                return False
        return True

    def _sigma_eval(self, q, tid) -> bool:
        return _eval_pred_entries(q.where, tid, self.ctx.entries)

    def encode_update(self, q: UpdateQuery, tid: int, in_block: bool):
        sigma_const = self._sigma_is_const(q, tid)
        if not in_block and sigma_const:
            if self._sigma_eval(q, tid):
                self._follow_update(q, tid)
            return
        self.audit.encoded_pairs += 1
        x = self.encode_predicate(q.where, q.index, tid)
        x_fixed = x.lo == x.hi
        # SET expressions all read the pre-update tuple: evaluate them before
        # any output entry replaces an input entry
        staged = []
        for attr, expr in q.set_clauses:
            if attr not in self.enc_attrs:
                continue
            if x_fixed and self._expr_is_const(expr, tid) and _is_const(
                self.ctx.entries[(tid, attr)]
            ):
                staged.append((attr, None, self._eval_const_expr(expr, tid)))
            else:
                staged.append((attr, self._expr(expr, tid), None))
        for attr, mu, const_val in staged:
            if mu is None:
                if x.lo > 0.5:
                    self.ctx.entries[(tid, attr)] = const_val
                continue
            mu_terms, mu_const, mu_lo, mu_hi = mu
            self._product_pair(q.index, tid, attr, x, mu_terms, mu_const, mu_lo, mu_hi)

    def _follow_update(self, q: UpdateQuery, tid: int):
        # replay-exact application; falls back to block encoding if any SET
        # expression reads an undetermined entry
        new_vals = {}
        for attr, expr in q.set_clauses:
            if attr not in self.enc_attrs:
                continue
            if self._expr_is_const(expr, tid):
                new_vals[attr] = self._eval_const_expr(expr, tid)
            else:
                terms, const, lo, hi = self._expr(expr, tid)
                out = self._var(f"t_q{q.index}_t{tid}_{attr}", lo, hi)
                self.model.add_constraint(
                    [(1.0, out)] + [(-c, v) for c, v in terms], "=", as_float(const), "follow_set"
                )
                new_vals[attr] = out
        for attr, val in new_vals.items():
            self.ctx.entries[(tid, attr)] = val

    def encode_delete(self, q: DeleteQuery, tid: int, in_block: bool):
        sigma_const = self._sigma_is_const(q, tid)
        if not in_block and sigma_const:
            if self._sigma_eval(q, tid):
                for attr in [ID_ATTR] + self.enc_attrs:
                    self.ctx.entries[(tid, attr)] = self.ctx.delete_sentinel
            return
        self.audit.encoded_pairs += 1
        x = self.encode_predicate(q.where, q.index, tid)
        if x.lo == x.hi:
            if x.lo > 0.5:
                for attr in [ID_ATTR] + self.enc_attrs:
                    entry = self.ctx.entries[(tid, attr)]
                    if _is_const(entry):
                        self.ctx.entries[(tid, attr)] = self.ctx.delete_sentinel
                    else:
                        self._product_pair(
                            q.index, tid, attr, x, [], self.ctx.delete_sentinel,
                            as_float(self.ctx.delete_sentinel), as_float(self.ctx.delete_sentinel),
                        )
            return
        sent = self.ctx.delete_sentinel
        for attr in [ID_ATTR] + self.enc_attrs:
            self._product_pair(
                q.index, tid, attr, x, [], sent, as_float(sent), as_float(sent)
            )

    def encode_insert(self, q: InsertQuery, alive: set[int], in_block: bool):
        tid = self.replay.inserted_ids[q.index]
        if tid not in self.universe:
            return
        alive.add(tid)
        self.ctx.entries[(tid, ID_ATTR)] = tid * SCALE
        in_window = q.index in self.scope.repair_window and any(
            v.slot_id in self.free_slots for v in q.values
        )
        self.audit.encoded_pairs += 1
        x = self._var(
            f"x_q{q.index}_t{tid}", 0.0 if in_window else 1.0, 1.0, VarKind.BINARY
        )
        self.ctx.indicators[(q.index, tid)] = x
        if not in_window:
            for a in self.enc_attrs:
                lit = q.values[self.attr_pos[a]]
                self.ctx.entries[(tid, a)] = lit.value
            return
        m = as_float(self.ctx.big_m)
        for a in self.enc_attrs:
            pos = self.attr_pos[a]
            lit = q.values[pos]
            lit_f = as_float(lit.value)
            # u = x * literal
            u = self._var(f"u_q{q.index}_t{tid}_{a}", 0.0, max(lit_f, 0.0))
            um = max(lit_f, 0.0) + 1.0
            self.model.add_constraint([(1.0, u)], "<=", lit_f, "ins_u")
            self.model.add_constraint([(1.0, u), (-um, x)], "<=", 0.0, "ins_u")
            self.model.add_constraint([(1.0, u), (-um, x)], ">=", lit_f - um, "ins_u")
            # w = (1 - x) * v_free
            vfree = self._var(f"ival_q{q.index}_{a}", 0.0, m)
            self.ctx.insert_choice[(q.index, pos)] = vfree
            w = self._var(f"w_q{q.index}_t{tid}_{a}", 0.0, m)
            wm = m + 1.0
            self.model.add_constraint([(1.0, w), (-1.0, vfree)], "<=", 0.0, "ins_w")
            self.model.add_constraint([(1.0, w), (wm, x)], "<=", wm, "ins_w")
            self.model.add_constraint([(1.0, w), (-1.0, vfree), (wm, x)], ">=", -wm, "ins_w")
            out = self._var(f"t_q{q.index}_t{tid}_{a}", 0.0, m)
            self.model.add_constraint([(1.0, out), (-1.0, u), (-1.0, w)], "=", 0.0, "ins_out")
            self.ctx.entries[(tid, a)] = out

    # -- endpoint pins (AssignVals) and objective -------------------------------

    def assign_vals(self):
        sent = self.ctx.delete_sentinel
        for tid in sorted(self.universe):
            if self.pin_tuples is not None and tid not in self.pin_tuples:
                continue
            if tid in self.soft_nc:
                continue
            c = self.complaint_map.get(tid)
            if c is not None:
                target = [sent] * len(self.enc_attrs) if c.expected is None else [
                    c.expected[self.attr_pos[a]] for a in self.enc_attrs
                ]
            elif tid in self.dn.rows:
                row = self.dn.rows[tid]
                target = [row.values[self.attr_pos[a]] for a in self.enc_attrs]
            else:
                target = [sent] * len(self.enc_attrs)
            for a, want in zip(self.enc_attrs, target):
                entry = self.ctx.entries.get((tid, a))
                if entry is None:
                    continue
                if _is_const(entry):
                    if entry != want:
                        self.model.mark_infeasible(
                            f"pinned {a} of tuple {tid}: encoded {fmt(entry)} != target {fmt(want)}"
                        )
                else:
                    self.model.add_constraint(
                        [(1.0, entry)], "=", as_float(want), f"pin_t{tid}_{a}"
                    )

    def encode_objective(self, free_slots: set[int]):
        dist_terms: list[tuple[float, VarRef]] = []
        weight_cap = 0.0
        m4 = 4.0 * as_float(self.ctx.big_m)
        for sid in sorted(free_slots):
            slot = self.log.slots[sid]
            if slot.kind is ParamKind.INSERT_VALUE:
                continue  # handled through the insert x/v gadget below
            p = self.ctx.param_vars.get(sid)
            if p is None:
                continue  # slot's query never encoded for any tuple
            w = self._weight(slot.original_value)
            dp = self._var(f"dpos_{sid}", 0.0, m4)
            dm = self._var(f"dneg_{sid}", 0.0, m4)
            self.model.add_constraint(
                [(1.0, p), (-1.0, dp), (1.0, dm)], "=", as_float(slot.original_value), f"delta_{sid}"
            )
            dist_terms += [(w, dp), (w, dm)]
            weight_cap += 2 * w * m4
        for q in self.log.queries[self.start_index - 1 :]:
            if not isinstance(q, InsertQuery):
                continue
            tid = self.replay.inserted_ids[q.index]
            x = self.ctx.indicators.get((q.index, tid))
            if x is None or x.lo == x.hi:
                continue
            for a in self.enc_attrs:
                pos = self.attr_pos[a]
                vfree = self.ctx.insert_choice.get((q.index, pos))
                if vfree is None:
                    continue
                lit = q.values[pos]
                w = self._weight(lit.value)
                dp = self._var(f"idpos_{q.index}_{pos}", 0.0, m4)
                dm = self._var(f"idneg_{q.index}_{pos}", 0.0, m4)
                self.model.add_constraint(
                    [(1.0, vfree), (-1.0, dp), (1.0, dm)], "=", as_float(lit.value), "ins_delta"
                )
                cost = self._var(f"icost_{q.index}_{pos}", 0.0, m4)
                self.model.add_constraint(
                    [(1.0, cost), (-1.0, dp), (-1.0, dm), (-m4, x)], ">=", -m4, "ins_cost"
                )
                dist_terms.append((w, cost))
                weight_cap += w * m4 * 3
        if self.soft_nc:
            gamma = 0.45 / max(weight_cap, 1e-9)
            terms = [(gamma * w, v) for w, v in dist_terms]
            for tid in sorted(self.soft_nc):
                for qidx in sorted(self.nc_indicator_queries):
                    q = self.log.query(qidx)
                    if isinstance(q, InsertQuery):
                        continue
                    x = self.ctx.indicators.get((qidx, tid))
                    if x is None:
                        x = self._creation_state_indicator(q, tid)
                    if x is not None:
                        terms.append((1.0, x))
            self.model.set_objective(terms)
        else:
            self.model.set_objective(dist_terms)

    def _creation_state_indicator(self, q, tid: int) -> Optional[VarRef]:
        """Matched-indicator for a tuple that does not flow through q (it is
        created later in the log): test the repaired WHERE against the
        tuple's first replayed values, mirroring the interval test of the
        refinement step."""
        for state in self.replay.trace:
            if tid in state.rows:
                row = state.rows[tid]
                probe = -tid  # negative pseudo id keeps entry keys distinct
                self.ctx.entries[(probe, ID_ATTR)] = tid * SCALE
                for a in self.enc_attrs:
                    self.ctx.entries[(probe, a)] = row.values[self.attr_pos[a]]
                return self._pred_node(q.where, q.index, probe, top=True)
        return None

    def _weight(self, original: Value) -> float:
        if not self.normalize:
            return 1.0
        return 1.0 / max(abs(as_float(original)), 1.0)

    # -- solution extraction ----------------------------------------------------

    def _extract(self, free_slots, solution: Solution, audit, skipped) -> RepairResult:
        if solution.status not in (Status.OPTIMAL, Status.FEASIBLE) or not solution.assignment:
            return RepairResult(
                self.log, [], solution.objective_value, solution, audit, skipped
            )
        new_values: dict[int, Value] = {}
        for sid, var in self.ctx.param_vars.items():
            val = from_float(solution.assignment[var.id])
            if val != self.log.slots[sid].original_value:
                new_values[sid] = val
        for q in self.log.queries:
            if not isinstance(q, InsertQuery):
                continue
            tid = self.replay.inserted_ids.get(q.index)
            x = self.ctx.indicators.get((q.index, tid))
            if x is None or x.lo == x.hi:
                continue
            if solution.assignment[x.id] < 0.5:
                for pos, lit in enumerate(q.values):
                    vfree = self.ctx.insert_choice.get((q.index, pos))
                    if vfree is None:
                        continue
                    val = from_float(solution.assignment[vfree.id])
                    if val != lit.value:
                        new_values[lit.slot_id] = val
        repaired = self.log.with_params(new_values)
        deltas = [
            (self.log.slots[sid], self.log.slots[sid].original_value, val)
            for sid, val in sorted(new_values.items())
        ]
        return RepairResult(
            repaired, deltas, solution.objective_value, solution, audit, skipped
        )

    def export_lp(self) -> str:
        model, _ = self.build_model()
        return export_lp(model)


def _atoms(pred):
    if pred is TRUE:
        return []
    if isinstance(pred, Atom):
        return [pred]
    out = []
    for c in pred.children:
        out.extend(_atoms(c))
    return out


def _eval_pred_entries(pred, tid, entries) -> bool:
    if pred is TRUE:
        return True
    if isinstance(pred, Atom):
        total = pred.lhs.const.value
        for t in pred.lhs.terms:
            total += fmul(t.coeff.value, entries[(tid, t.attr)])
        rhs = pred.rhs.value
        return {
            "<": total < rhs,
            "<=": total <= rhs,
            "=": total == rhs,
            ">=": total >= rhs,
            ">": total > rhs,
        }[pred.op]
    if pred.kind == "and":
        return all(_eval_pred_entries(c, tid, entries) for c in pred.children)
    return any(_eval_pred_entries(c, tid, entries) for c in pred.children)


def manhattan_distance(deltas, normalize: bool = True) -> float:
    """Objective value implied by a list of (slot, old, new) deltas."""
    total = 0.0
    for slot, old, new in deltas:
        w = 1.0 / max(abs(as_float(old)), 1.0) if normalize else 1.0
        total += w * abs(as_float(new) - as_float(old))
    return total


def basic_repair(
    log: QueryLog,
    d0: Relation,
    dn: Relation,
    complaints: ComplaintSet,
    scope: Optional[RepairScope] = None,
    tuple_filter: Optional[set[int]] = None,
    **options,
) -> RepairResult:
    """Whole-log MILP repair; every tuple (or `tuple_filter`) is encoded and
    every non-complaint encoded tuple is pinned to its dirty final value."""
    enc = LogEncoder(
        log, d0, dn, complaints, scope=scope, tuple_filter=tuple_filter, **options
    )
    return enc.repair()
