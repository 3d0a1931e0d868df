"""Exact rational time values.

All simulated time is an ``mpq``; rendering is canonical ``num/den`` with a
positive denominator so traces are bit-identical across platforms.
"""

from __future__ import annotations

from fractions import Fraction

from gmpy2 import mpq

Q = mpq
INF = float("inf")

#: resolution of every seeded draw inside an interval
GRID = 1 << 20


def to_q(value) -> mpq:
    """Coerce ints, ``Fraction``s, ``mpq`` and ``"num/den"`` strings to ``mpq``.

    Floats are rejected: they would silently lose exactness.
    """
    if isinstance(value, float):
        if value == INF:
            raise ValueError("infinity is not a rational")
        raise TypeError(f"refusing float {value!r}; pass a string 'num/den' or an int")
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        try:
            return mpq(text)
        except ValueError:
            raise ValueError(f"not a rational: {value!r}") from None
    return mpq(value)


def fmt_q(value) -> str:
    if value == INF:
        return "inf"
    v = to_q(value)
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def grid_point(lo, width, k: int):
    """``lo + width * k / GRID``: one point of the seeded sampling grid."""
    return lo + width * mpq(k, GRID)
