import pytest

from qfix.values import SCALE, fixed, fmt, fmul, from_float, as_float


def test_fixed_from_int_str_float():
    assert fixed(3) == 3 * SCALE
    assert fixed("0.3") == 3000
    assert fixed("86000.0001") == 860000001
    assert fixed(0.3) == 3000
    assert fixed("-2.5") == -25000


def test_fmt_round_trips():
    for s in ["0", "1", "-1", "0.3", "87000.001", "-12.0005", "200"]:
        assert fmt(fixed(s)) == s


def test_fmul_exact_cases():
    assert fmul(fixed(86000), fixed("0.3")) == fixed(25800)
    assert fmul(fixed("0.3"), fixed("0.3")) == fixed("0.09")
    assert fmul(fixed(2), fixed(3)) == fixed(6)


def test_fmul_rounds_half_even():
    # 0.0001 * 0.5 = 0.00005 -> ties to even grid step 0.0000
    assert fmul(fixed("0.0001"), fixed("0.5")) == 0
    # 0.0003 * 0.5 = 0.00015 -> ties to 0.0002
    assert fmul(fixed("0.0003"), fixed("0.5")) == 2


def test_from_float_quantizes():
    assert from_float(as_float(fixed("87000.001"))) == fixed("87000.001")
    assert from_float(1e-9) == 0


def test_rejects_garbage():
    with pytest.raises(ValueError):
        fixed("abc")
    with pytest.raises(ValueError):
        fixed(True)
