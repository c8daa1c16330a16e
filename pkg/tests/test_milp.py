"""Solver correctness against independent oracles.

The enumeration oracle fixes every binary assignment and solves the leaf LP
with scipy's HiGHS, so it shares nothing with the built-in simplex or
branch & bound.
"""

import itertools
import math
import random

import numpy as np
import pytest
from scipy.optimize import linprog

from qfix.errors import ModelMalformed
from qfix.milp import (
    INF,
    MilpModel,
    SolverConfig,
    Status,
    VarKind,
    check_solution,
    reduce_model,
    solve,
    solve_reduced,
)


def scipy_lp(model, binary_fix=None):
    """LP optimum via scipy (binaries fixed to given values); None if infeasible."""
    n = len(model.vars)
    c = np.zeros(n)
    for coeff, vid in model.objective:
        c[vid] += coeff
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        for coeff, vid in con.terms:
            row[vid] += coeff
        if con.op == "<=":
            A_ub.append(row), b_ub.append(con.rhs)
        elif con.op == ">=":
            A_ub.append(-row), b_ub.append(-con.rhs)
        else:
            A_eq.append(row), b_eq.append(con.rhs)
    bounds = []
    for v in model.vars:
        lo, hi = v.lo, v.hi
        if binary_fix and v.id in binary_fix:
            lo = hi = binary_fix[v.id]
        bounds.append((None if lo == -INF else lo, None if hi == INF else hi))
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    return res.fun if res.status == 0 else None


def enumerate_milp(model):
    """Brute-force optimum: scipy LP per binary assignment leaf."""
    bins = model.binary_ids()
    best = None
    for assignment in itertools.product([0.0, 1.0], repeat=len(bins)):
        obj = scipy_lp(model, dict(zip(bins, assignment)))
        if obj is not None and (best is None or obj < best - 1e-12):
            best = obj
    return best


def random_model(rng, max_binaries=6):
    m = MilpModel(SolverConfig(time_limit_secs=30))
    nb = rng.randint(0, max_binaries)
    nc = rng.randint(1, 4)
    vars_ = []
    for i in range(nb):
        vars_.append(m.add_var(f"b{i}", VarKind.BINARY))
    for i in range(nc):
        lo = rng.choice([0.0, -5.0])
        hi = rng.choice([5.0, 10.0, INF])
        vars_.append(m.add_var(f"x{i}", lo=lo, hi=hi))
    rows = rng.randint(1, 6)
    for r in range(rows):
        terms = []
        for v in vars_:
            if rng.random() < 0.6:
                terms.append((rng.randint(-4, 4), v))
        terms = [(c, v) for c, v in terms if c]
        if not terms:
            continue
        op = rng.choice(["<=", ">=", "="])
        rhs = rng.randint(-6, 10)
        if op == "=" and rng.random() < 0.5:
            # keep equality rows mostly satisfiable
            op = rng.choice(["<=", ">="])
        m.add_constraint(terms, op, rhs, f"r{r}")
    obj = []
    for v in vars_:
        coeff = rng.randint(0, 3)
        if v.hi == INF and coeff == 0:
            coeff = 1  # keep the LP bounded below
        obj.append((coeff, v))
    m.set_objective(obj)
    return m


def test_min_x_single_constraint():
    m = MilpModel()
    x = m.add_var("x", lo=0.0, hi=INF)
    m.add_constraint([(1.0, x)], ">=", 3.0)
    m.set_objective([(1.0, x)])
    s = solve(m)
    assert s.status is Status.OPTIMAL
    assert abs(s.objective_value - 3.0) < 1e-9
    assert abs(s.assignment[x.id] - 3.0) < 1e-9


def test_big_m_indicator_pair():
    # min d s.t. d >= 5 - 10 b, d >= 0; with b <= 0 forced -> d = 5; free -> b=1, d=0
    for fix_b, expect in [(True, 5.0), (False, 0.0)]:
        m = MilpModel()
        b = m.add_var("b", VarKind.BINARY)
        d = m.add_var("d", lo=0.0, hi=100.0)
        m.add_constraint([(1.0, d), (10.0, b)], ">=", 5.0)
        if fix_b:
            m.add_constraint([(1.0, b)], "<=", 0.0)
        m.set_objective([(1.0, d)])
        s = solve(m)
        assert s.status is Status.OPTIMAL and abs(s.objective_value - expect) < 1e-9
        assert enumerate_milp(m) == pytest.approx(expect, abs=1e-9)


def test_infeasible_is_certified():
    m = MilpModel()
    x = m.add_var("x", lo=0.0, hi=1.0)
    b = m.add_var("b", VarKind.BINARY)
    m.add_constraint([(1.0, x), (1.0, b)], ">=", 3.5)
    m.set_objective([(1.0, x)])
    assert solve(m).status is Status.INFEASIBLE


def test_solutions_verify_and_match_enumeration():
    rng = random.Random(2024)
    mismatches = []
    for trial in range(100):
        m = random_model(rng)
        s = solve(m)
        oracle = enumerate_milp(m)
        if s.status in (Status.OPTIMAL, Status.FEASIBLE):
            assert check_solution(m, s.assignment) == [], f"trial {trial}"
            assert oracle is not None, f"trial {trial}: solver found, oracle did not"
            if abs(s.objective_value - oracle) > 1e-6:
                mismatches.append((trial, s.objective_value, oracle))
        elif s.status is Status.INFEASIBLE:
            assert oracle is None, f"trial {trial}: oracle found {oracle}, solver infeasible"
    assert not mismatches


def test_solve_reduced_matches_solve():
    rng = random.Random(99)
    for trial in range(40):
        m = random_model(rng, max_binaries=4)
        a, b = solve(m), solve_reduced(m)
        assert (a.status is Status.INFEASIBLE) == (b.status is Status.INFEASIBLE), trial
        if a.status is Status.OPTIMAL:
            assert b.status is Status.OPTIMAL
            assert abs(a.objective_value - b.objective_value) < 1e-6, trial
            assert check_solution(m, b.assignment) == [], trial


def test_reduce_folds_fixed_chains():
    m = MilpModel()
    a = m.add_var("a", lo=4.0, hi=4.0)
    b = m.add_var("b", lo=0.0, hi=10.0)
    c = m.add_var("c", lo=0.0, hi=10.0)
    m.add_constraint([(1.0, b), (-1.0, a)], "=", 0.0)  # b = a
    m.add_constraint([(1.0, c), (-2.0, b)], "=", 1.0)  # c = 2b + 1
    m.set_objective([(1.0, c)])
    red = reduce_model(m)
    assert red.model is not None and len(red.model.vars) == 0
    assert red.fixed == {a.id: 4.0, b.id: 4.0, c.id: 9.0}
    s = solve_reduced(m)
    assert s.status is Status.OPTIMAL and s.objective_value == pytest.approx(9.0)


def test_reduce_detects_constant_contradiction():
    m = MilpModel()
    a = m.add_var("a", lo=2.0, hi=2.0)
    b = m.add_var("b", lo=5.0, hi=5.0)
    m.add_constraint([(1.0, a), (-1.0, b)], "=", 0.0)
    red = reduce_model(m)
    assert red.model is None and red.infeasibility_witness
    assert solve_reduced(m).status is Status.INFEASIBLE


def test_timeout_status():
    rng = random.Random(5)
    m = MilpModel(SolverConfig(time_limit_secs=0.0))
    x = m.add_var("x", lo=0.0, hi=10.0)
    m.add_constraint([(1.0, x)], ">=", 1.0)
    m.set_objective([(1.0, x)])
    s = solve(m, time_limit=0.0)
    assert s.status in (Status.TIMED_OUT, Status.OPTIMAL)  # tiny model may finish in the first tick


def test_node_limit_is_respected():
    m = MilpModel(SolverConfig(node_limit=1))
    bs = [m.add_var(f"b{i}", VarKind.BINARY) for i in range(6)]
    m.add_constraint([(1.0, b) for b in bs], ">=", 2.5)
    m.add_constraint([(2.0, bs[0]), (1.0, bs[1]), (1.0, bs[2])], "<=", 2.5)
    m.set_objective([(1.0, b) for b in bs])
    s = solve(m)
    assert s.stats.nodes <= 2


def test_unbounded_raises():
    m = MilpModel()
    x = m.add_var("x", lo=-INF, hi=INF)
    m.add_constraint([(1.0, x)], "<=", 5.0)
    m.set_objective([(1.0, x)])
    with pytest.raises(ModelMalformed):
        solve(m)
