import random

import pytest

from qfix.errors import QuerySyntaxError
from qfix.milp import INF, MilpModel, Status, VarKind, export_lp, import_lp, solve_reduced
from test_milp import random_model


def test_export_contains_subject_to_row():
    m = MilpModel()
    x = m.add_var("x", lo=0.0, hi=5.0)
    m.add_constraint([(2.0, x)], ">=", 3.0, "row")
    text = export_lp(m)
    assert "Subject To" in text
    assert "c0: 2 x >= 3" in text
    assert text.strip().endswith("End")


def test_binary_listed_under_binaries():
    m = MilpModel()
    b = m.add_var("x_q1_t3", VarKind.BINARY)
    m.add_constraint([(1.0, b)], "<=", 1.0)
    text = export_lp(m)
    section = text.split("Binaries", 1)[1]
    assert "x_q1_t3" in section


def test_name_sanitization():
    m = MilpModel()
    v = m.add_var("t[3].owed@2", lo=0.0, hi=1.0)
    m.add_constraint([(1.0, v)], "<=", 1.0)
    text = export_lp(m)
    assert "t_3__owed_2" in text
    import_lp(text)  # sanitized names must re-import


def test_import_rejects_malformed_section_order():
    bad = "Subject To\n c0: x >= 1\nMinimize\n obj: x\nEnd\n"
    with pytest.raises(QuerySyntaxError):
        import_lp(bad)
    bad2 = "Minimize\n obj: x\nBounds\n x free\nSubject To\n c0: x >= 1\nEnd\n"
    with pytest.raises(QuerySyntaxError):
        import_lp(bad2)


def test_roundtrip_identity_on_small_model():
    m = MilpModel()
    x = m.add_var("x", lo=0.0, hi=INF)
    y = m.add_var("y", VarKind.BINARY)
    m.add_constraint([(1.0, x), (-4.5, y)], ">=", 0.25, "link")
    m.add_constraint([(1.0, x)], "<=", 9.0, "cap")
    m.set_objective([(1.0, x), (0.125, y)])
    m2 = import_lp(export_lp(m))
    assert [v.name for v in m2.vars] == [v.name for v in m.vars]
    assert [(v.lo, v.hi, v.kind) for v in m2.vars] == [(v.lo, v.hi, v.kind) for v in m.vars]
    assert [(c.terms, c.op, c.rhs) for c in m2.constraints] == [
        (c.terms, c.op, c.rhs) for c in m.constraints
    ]
    assert sorted(m2.objective) == sorted(m.objective)


def test_roundtrip_solve_agreement_random():
    rng = random.Random(31337)
    checked = 0
    for _ in range(30):
        m = random_model(rng, max_binaries=5)
        s1 = solve_reduced(m)
        s2 = solve_reduced(import_lp(export_lp(m)))
        assert (s1.status is Status.INFEASIBLE) == (s2.status is Status.INFEASIBLE)
        if s1.status is Status.OPTIMAL:
            assert abs(s1.objective_value - s2.objective_value) < 1e-6
            checked += 1
    assert checked > 5


def test_tiny_weights_round_trip_without_exponents():
    m = MilpModel()
    x = m.add_var("x", lo=0.0, hi=2e6)
    m.add_constraint([(1.0, x)], ">=", 85700.0)
    m.set_objective([(1.0 / 85700.0, x)])
    text = export_lp(m)
    assert "e-" not in text and "E-" not in text
    s = solve_reduced(import_lp(text))
    assert s.objective_value == pytest.approx(1.0, abs=1e-9)
