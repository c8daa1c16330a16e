import random

import pytest

from qfix.errors import InconsistentComplaints, SchemaMismatch, UnknownTarget
from qfix.relational import (
    AttrId,
    Complaint,
    ComplaintSet,
    Relation,
    TupleRow,
    apply_complaints,
    complaints_from_jsonl,
    complaints_to_jsonl,
    diff_states,
    state_from_csv,
    state_to_csv,
    subsample_complaints,
)
from qfix.values import fixed

from conftest import TAX_SCHEMA, TAX_ROWS, make_state


def vrow(rid, *vals):
    return TupleRow(rid, tuple(fixed(v) for v in vals))


@pytest.fixture
def small():
    return make_state(TAX_SCHEMA[:2], [(1, 10, 20), (2, 30, 40), (3, 50, 60)])


def test_apply_modify_complaint_tax():
    # dirty t3=(86000, 25800, 60200), complaint t3 -> (86000, 21500, 64500)
    dirty = make_state(TAX_SCHEMA, [(3, 86000, 25800, 60200)])
    cset = ComplaintSet([Complaint(3, vrow(3, 86000, 21500, 64500).values)])
    out = apply_complaints(dirty, cset)
    assert out.rows[3].values == vrow(3, 86000, 21500, 64500).values
    # input untouched
    assert dirty.rows[3].values == vrow(3, 86000, 25800, 60200).values


def test_apply_empty_set_is_identity(small):
    assert apply_complaints(small, ComplaintSet()) == small


def test_apply_delete_and_add(small):
    cset = ComplaintSet([Complaint(1, None), Complaint(9, vrow(9, 7, 8).values)])
    out = apply_complaints(small, cset)
    assert set(out.rows) == {2, 3, 9}
    assert out.rows[9].values == vrow(9, 7, 8).values


def test_apply_addition_without_id_gets_fresh_id(small):
    out = apply_complaints(small, ComplaintSet([Complaint(None, vrow(0, 1, 2).values)]))
    assert set(out.rows) == {1, 2, 3, 4}


def test_apply_unknown_target_raises(small):
    with pytest.raises(UnknownTarget):
        apply_complaints(small, ComplaintSet([Complaint(7, None)]))


def test_inconsistent_set_rejected():
    with pytest.raises(InconsistentComplaints):
        ComplaintSet([Complaint(1, None), Complaint(1, (fixed(1), fixed(2)))])


def test_diff_identical_is_empty(small):
    assert len(diff_states(small, small)) == 0


def test_diff_modify():
    dirty = make_state(TAX_SCHEMA, [(3, 86000, 25800, 60200)])
    truth = make_state(TAX_SCHEMA, [(3, 86000, 21500, 64500)])
    cset = diff_states(dirty, truth)
    assert len(cset) == 1
    (c,) = cset
    assert c.target_id == 3 and c.expected == truth.rows[3].values


def test_diff_extra_row_becomes_deletion(small):
    truth = small.with_rows([r for rid, r in small.rows.items() if rid != 3])
    cset = diff_states(small, truth)
    assert [(c.target_id, c.expected) for c in cset] == [(3, None)]


def test_diff_schema_mismatch():
    a = make_state(TAX_SCHEMA[:2], [(1, 1, 2)])
    b = make_state((AttrId(0, "x"), AttrId(1, "y")), [(1, 1, 2)])
    with pytest.raises(SchemaMismatch):
        diff_states(a, b)


def test_roundtrip_apply_diff_random():
    rng = random.Random(7)
    schema = TAX_SCHEMA[:2]
    for _ in range(50):
        ids_a = rng.sample(range(1, 12), rng.randint(0, 8))
        ids_b = rng.sample(range(1, 12), rng.randint(0, 8))
        dirty = make_state(schema, [(i, rng.randint(0, 9), rng.randint(0, 9)) for i in ids_a])
        truth = make_state(schema, [(i, rng.randint(0, 9), rng.randint(0, 9)) for i in ids_b])
        assert apply_complaints(dirty, diff_states(dirty, truth)) == truth


def test_apply_order_insensitive(small):
    truth = make_state(TAX_SCHEMA[:2], [(1, 0, 0), (2, 30, 40), (5, 9, 9)])
    cset = diff_states(small, truth)
    perms = [list(cset), list(reversed(list(cset)))]
    results = [apply_complaints(small, ComplaintSet(p)) for p in perms]
    assert results[0] == results[1] == truth


def test_subsample_fractions(small):
    truth = make_state(TAX_SCHEMA[:2], [(i, 0, 0) for i in range(1, 4)])
    cset = diff_states(small, truth)
    assert subsample_complaints(cset, 1.0, 1) == cset
    assert len(subsample_complaints(cset, 0.0, 1)) == 0


def test_subsample_deterministic_and_sized():
    cset = ComplaintSet([Complaint(i, (fixed(i),)) for i in range(1, 21)])
    cs = ComplaintSet(list(cset)[:20])
    a = subsample_complaints(cs, 0.25, seed=42)
    b = subsample_complaints(cs, 0.25, seed=42)
    assert len(a) == 5 and a == b
    assert set(a.target_ids()) <= set(range(1, 21))


def test_csv_roundtrip(small):
    text = state_to_csv(small)
    assert text.splitlines()[0] == "id,income,owed"
    back = state_from_csv(text)
    assert back == small


def test_jsonl_roundtrip(small):
    cset = ComplaintSet(
        [Complaint(3, vrow(3, 1, 2).values), Complaint(7, None), Complaint(None, vrow(0, 5, 6).values)]
    )
    text = complaints_to_jsonl(cset, small.schema)
    back = complaints_from_jsonl(text, small.schema)
    assert back == cset


def test_jsonl_partial_expected_uses_base_state(small):
    text = '{"id": 2, "expected": {"owed": 99}}\n'
    cset = complaints_from_jsonl(text, small.schema, base_state=small)
    (c,) = cset
    assert c.expected == (fixed(30), fixed(99))
    with pytest.raises(SchemaMismatch):
        complaints_from_jsonl(text, small.schema)
