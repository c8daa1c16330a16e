"""Exact decimal values on a fixed grid.

All tuple values, query constants and repair deltas live on a decimal grid
with FRAC_DIGITS fractional digits, stored as plain Python ints scaled by
SCALE.  Replay, state diffing and complaint matching therefore compare
bit-exact integers; binary floats only appear inside the MILP solver and are
re-quantized to this grid on the way out.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation
from fractions import Fraction

FRAC_DIGITS = 4
SCALE = 10**FRAC_DIGITS

Value = int  # scaled by SCALE


class ValueError_(ValueError):
    """Raised for unparseable or off-grid numeric literals."""


def fixed(x) -> Value:
    """Convert int/str/float/Decimal/Fraction to a grid value (round half even)."""
    if isinstance(x, bool):
        raise ValueError_(f"not a numeric value: {x!r}")
    if isinstance(x, int):
        return x * SCALE
    if isinstance(x, float):
        x = Decimal(repr(x))
    if isinstance(x, str):
        try:
            x = Decimal(x)
        except InvalidOperation as exc:
            raise ValueError_(f"bad numeric literal: {x!r}") from exc
    if isinstance(x, Decimal):
        q = (x * SCALE).to_integral_value(rounding="ROUND_HALF_EVEN")
        return int(q)
    if isinstance(x, Fraction):
        return _round_half_even(x.numerator * SCALE, x.denominator)
    raise ValueError_(f"cannot convert {type(x).__name__} to a grid value")


def fmul(a: Value, b: Value) -> Value:
    """Grid product round(a*b/SCALE), half-even."""
    return _round_half_even(a * b, SCALE)


def as_float(v: Value) -> float:
    return v / SCALE


def from_float(x: float) -> Value:
    """Quantize a solver float back onto the grid (round half even)."""
    return fixed(Decimal(repr(float(x))))


def fmt(v: Value) -> str:
    """Canonical decimal string: no exponent, trailing zeros trimmed."""
    sign = "-" if v < 0 else ""
    v = abs(v)
    whole, frac = divmod(v, SCALE)
    if frac == 0:
        return f"{sign}{whole}"
    digits = f"{frac:0{FRAC_DIGITS}d}".rstrip("0")
    return f"{sign}{whole}.{digits}"


def _round_half_even(num: int, den: int) -> int:
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2 == 1):
        q += 1
    return q
