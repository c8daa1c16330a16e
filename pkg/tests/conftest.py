"""Shared fixtures: the running tax example and small helpers."""

import pytest

from qfix.relational import AttrId, Relation, TupleRow
from qfix.querylog import parse_log
from qfix.values import fixed


TAX_SCHEMA = (AttrId(0, "income"), AttrId(1, "owed"), AttrId(2, "pay"))

TAX_ROWS = [
    (1, 50000, 12500, 37500),
    (2, 78000, 19500, 58500),
    (3, 86000, 21500, 64500),
    (4, 86500, 21625, 64875),
]

TAX_DIRTY_LOG = """\
UPDATE Taxes SET owed = income * 0.3 WHERE income >= 85700;
INSERT INTO Taxes VALUES (87000, 21750, 65250);
UPDATE Taxes SET pay = income - owed WHERE TRUE;
"""

TAX_TRUE_LOG = TAX_DIRTY_LOG.replace("85700", "87500")


def make_state(schema, rows, domain_hint=None):
    return Relation(
        schema,
        [TupleRow(rid, tuple(fixed(v) for v in vals)) for rid, *vals in rows],
        domain_hint,
    )


@pytest.fixture
def tax_d0():
    return make_state(TAX_SCHEMA, TAX_ROWS, [(fixed(0), fixed(200000))] * 3)


@pytest.fixture
def tax_dirty_log():
    return parse_log(TAX_DIRTY_LOG, [a.name for a in TAX_SCHEMA])


@pytest.fixture
def tax_true_log():
    return parse_log(TAX_TRUE_LOG, [a.name for a in TAX_SCHEMA])
