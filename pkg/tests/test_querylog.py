import itertools

import pytest

from qfix.errors import (
    DuplicateInsertId,
    NonLinearExpression,
    QuerySyntaxError,
    UnknownAttribute,
)
from qfix.querylog import (
    Atom,
    BoolNode,
    DeleteQuery,
    InsertQuery,
    ParamKind,
    TRUE,
    UpdateQuery,
    apply_query,
    eval_predicate,
    parse_log,
    render_log,
    run_log,
)
from qfix.relational import AttrId, TupleRow
from qfix.values import fixed, fmt

from conftest import TAX_SCHEMA, TAX_ROWS, TAX_DIRTY_LOG, make_state

ATTRS = [a.name for a in TAX_SCHEMA]


# --- parsing -----------------------------------------------------------------


def test_parse_tax_update():
    log = parse_log("UPDATE Taxes SET owed = income * 0.3 WHERE income >= 85700;", ATTRS)
    (q,) = log.queries
    assert isinstance(q, UpdateQuery)
    atom = q.where
    assert isinstance(atom, Atom)
    assert atom.op == ">=" and atom.rhs.value == fixed(85700)
    assert atom.lhs.terms[0].attr == "income"
    ((attr, expr),) = q.set_clauses
    assert attr == "owed"
    assert expr.terms[0].coeff.value == fixed("0.3")
    assert expr.terms[0].attr == "income"


def test_parse_single_atom_delete():
    log = parse_log("DELETE FROM T WHERE owed < 20;", ATTRS)
    (q,) = log.queries
    assert isinstance(q, DeleteQuery)
    assert isinstance(q.where, Atom) and q.where.op == "<"


def test_parse_relative_set_and_range():
    log = parse_log("UPDATE T SET owed = owed + 5 WHERE income >= 10 AND income <= 14;", ATTRS)
    (q,) = log.queries
    ((_, expr),) = q.set_clauses
    assert expr.const.value == fixed(5) and expr.const.slot_id is not None
    assert isinstance(q.where, BoolNode) and q.where.kind == "and"
    assert len(q.where.children) == 2


def test_between_desugars_to_two_atoms():
    log = parse_log("UPDATE T SET owed = 3 WHERE income BETWEEN 5 AND 9;", ATTRS)
    (q,) = log.queries
    ops = sorted(a.op for a in q.where.children)
    assert ops == ["<=", ">="]


def test_every_literal_gets_a_slot():
    log = parse_log(TAX_DIRTY_LOG, ATTRS)
    kinds = sorted((s.kind for s in log.slots.values()), key=lambda k: k.value)
    assert kinds == [
        ParamKind.INSERT_VALUE,
        ParamKind.INSERT_VALUE,
        ParamKind.INSERT_VALUE,
        ParamKind.SET_COEFFICIENT,
        ParamKind.WHERE_CONSTANT,
    ]
    # implicit 1/-1 coefficients of `income - owed` carry no slot
    q3 = log.query(3)
    assert all(t.coeff.slot_id is None for t in q3.set_clauses[0][1].terms)


def test_render_parse_roundtrip_structural():
    cases = [
        TAX_DIRTY_LOG,
        "UPDATE T SET owed = 1, pay = pay + 2 WHERE income = 5 OR owed > 3 AND pay < 9;\n",
        "DELETE FROM T WHERE id = 4;\n",
        "INSERT INTO T VALUES (1, 2.5, 3);\n",
        "UPDATE T SET pay = 0.25 * income - 3 WHERE TRUE;\n",
    ]
    for text in cases:
        log = parse_log(text, ATTRS)
        again = parse_log(render_log(log), ATTRS)
        assert again == log, text


def test_parse_errors():
    with pytest.raises(QuerySyntaxError):
        parse_log("UPDATE T SET owed = 3 WHERE income >= 5", ATTRS)  # missing ;
    with pytest.raises(UnknownAttribute):
        parse_log("UPDATE T SET bogus = 3;", ATTRS)
    with pytest.raises(NonLinearExpression):
        parse_log("UPDATE T SET owed = income * pay;", ATTRS)
    with pytest.raises(QuerySyntaxError):
        parse_log("SELECT 1;", ATTRS)


def test_comments_and_blank_lines():
    log = parse_log("-- header\n\nDELETE FROM T WHERE owed < 1; -- trailing\n", ATTRS)
    assert len(log) == 1


# --- predicate evaluation ----------------------------------------------------


def idx(schema):
    return {a.name: a.index for a in schema}


def test_eval_tax_atom():
    log = parse_log("UPDATE T SET owed = 1 WHERE income >= 85700;", ATTRS)
    row = TupleRow(3, (fixed(86000), fixed(21500), fixed(64500)))
    assert eval_predicate(log.query(1).where, row, idx(TAX_SCHEMA))


def test_eval_true_literal():
    assert eval_predicate(TRUE, TupleRow(1, (fixed(0),) * 3), idx(TAX_SCHEMA))


def test_eval_matches_truth_table():
    log = parse_log(
        "DELETE FROM T WHERE income >= 5 AND income <= 9 OR owed = 3;", ATTRS
    )
    pred = log.query(1).where
    for a1, a2 in itertools.product(range(0, 11), range(0, 5)):
        row = TupleRow(1, (fixed(a1), fixed(a2), fixed(0)))
        expected = (5 <= a1 <= 9) or (a2 == 3)
        assert eval_predicate(pred, row, idx(TAX_SCHEMA)) == expected, (a1, a2)


def test_eval_strict_ops_and_id():
    log = parse_log("DELETE FROM T WHERE id > 2 AND income < 5;", ATTRS)
    pred = log.query(1).where
    assert eval_predicate(pred, TupleRow(3, (fixed(4), fixed(0), fixed(0))), idx(TAX_SCHEMA))
    assert not eval_predicate(pred, TupleRow(2, (fixed(4), fixed(0), fixed(0))), idx(TAX_SCHEMA))
    assert not eval_predicate(pred, TupleRow(3, (fixed(5), fixed(0), fixed(0))), idx(TAX_SCHEMA))


# --- replay ------------------------------------------------------------------


@pytest.fixture
def d0():
    return make_state(TAX_SCHEMA, TAX_ROWS)


def test_apply_update_tax_q1(d0):
    log = parse_log("UPDATE Taxes SET owed = income * 0.3 WHERE income >= 85700;", ATTRS)
    out = apply_query(log.query(1), d0)
    assert out.rows[3].values[1] == fixed(25800)
    assert out.rows[1] == d0.rows[1]
    assert d0.rows[3].values[1] == fixed(21500)  # input untouched


def test_update_matching_nothing_is_identity(d0):
    log = parse_log("UPDATE Taxes SET owed = 1 WHERE income >= 999999;", ATTRS)
    assert apply_query(log.query(1), d0) == d0


def test_set_reads_pre_update_values(d0):
    log = parse_log("UPDATE T SET pay = income - owed WHERE TRUE;", ATTRS)
    dirty = make_state(TAX_SCHEMA, [(3, 86000, 25800, 0)])
    out = apply_query(log.query(1), dirty)
    assert out.rows[3].values[2] == fixed(60200)


def test_run_log_empty(d0):
    log = parse_log("", ATTRS)
    rr = run_log(log, d0)
    assert rr.final == d0 and rr.trace == [d0]


def test_run_log_tax_fixture(d0):
    log = parse_log(TAX_DIRTY_LOG, ATTRS)
    rr = run_log(log, d0)
    assert len(rr.trace) == 4
    assert rr.final.rows[3].values == (fixed(86000), fixed(25800), fixed(60200))
    assert rr.final.rows[4].values == (fixed(86500), fixed(25950), fixed(60550))
    assert rr.inserted_ids == {2: 5}
    # determinism: bit-identical rerun
    rr2 = run_log(log, d0)
    assert rr2.trace == rr.trace


def test_commuting_point_updates(d0):
    a = "UPDATE T SET owed = 1 WHERE id = 1;\nUPDATE T SET owed = 2 WHERE id = 2;\n"
    b = "UPDATE T SET owed = 2 WHERE id = 2;\nUPDATE T SET owed = 1 WHERE id = 1;\n"
    ra = run_log(parse_log(a, ATTRS), d0)
    rb = run_log(parse_log(b, ATTRS), d0)
    assert ra.final == rb.final


def test_insert_assigns_max_plus_one(d0):
    log = parse_log("INSERT INTO T VALUES (1, 2, 3);\nDELETE FROM T WHERE id = 5;\nINSERT INTO T VALUES (4, 5, 6);", ATTRS)
    rr = run_log(log, d0)
    assert rr.inserted_ids == {1: 5, 3: 5}
    assert rr.final.rows[5].values == (fixed(4), fixed(5), fixed(6))


def test_frame_property_rows_failing_sigma_untouched(d0):
    log = parse_log("UPDATE T SET owed = 0 WHERE income >= 80000;", ATTRS)
    out = apply_query(log.query(1), d0)
    for rid, row in d0.rows.items():
        if row.values[0] < fixed(80000):
            assert out.rows[rid] == row
