"""Shared hypothesis strategies."""
from fractions import Fraction

from hypothesis import strategies as st

from qloop.scalars import RatScalar, var

S, U, V = var("s"), var("u"), var("v")


@st.composite
def laurent(draw, max_terms=3):
    """A small Laurent polynomial in s, u, v with integer coefficients."""
    out = RatScalar(0)
    for _ in range(draw(st.integers(1, max_terms))):
        c = draw(st.integers(-5, 5))
        a, b, d = (draw(st.integers(-2, 2)) for _ in range(3))
        out = out + c * S ** a * U ** b * V ** d
    return out


@st.composite
def rationals(draw):
    num = draw(laurent())
    den = draw(laurent().filter(lambda x: not x.is_zero()))
    return num / den


fractions = st.fractions(min_value=-20, max_value=20, max_denominator=9).filter(lambda x: x != 0)


def nonzero(x):
    return not x.is_zero()
