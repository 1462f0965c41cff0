from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qloop.builders import f, g, gt
from qloop.scalars import (
    ONE, ZERO, DivisionByZero, GrammarError, PoleAtPoint, PrimePoint, RatScalar,
    ResidualPole, SubstitutionPole, eps_limit, eval_exact, eval_mod_p, limit_with_factor,
    parse, scaling_limit, scaling_substitute, substitute, var,
)
from strategies import S, U, V, fractions, laurent, nonzero, rationals

P = 2 ** 62 - 57
GAMMA = S ** 4 - S ** -4


def test_additive_inverse():
    assert (U - V) + (V - U) == ZERO


def test_gcd_cancellation():
    assert (U ** 2 - V ** 2) / (U - V) == U + V


def test_gamma_inverse():
    assert GAMMA * GAMMA.inv() == ONE


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        U / ZERO


def test_substitute_against_direct_evaluation():
    fq = f(U, V)
    at = substitute(fq, {"v": S ** 4 * U})
    for sv, uv in [(2, 3), (3, 5), (Fraction(1, 2), 7), (5, Fraction(2, 3)), (7, 11)]:
        q = Fraction(sv) ** 4
        want = (uv * q - q * uv / q) / (uv - q * uv)
        assert eval_exact(at, {"s": sv, "u": uv}) == want


def test_substitute_identity_and_pole():
    r = f(U, V)
    assert substitute(r, {"u": U}) == r
    with pytest.raises(SubstitutionPole):
        substitute(GAMMA * U / (U - V), {"v": U})


def test_eval_exact_examples():
    q = RatScalar(2)
    assert eval_exact(f(U, V, q), {"u": 3, "v": 5}) == Fraction(-7, 4)
    assert eval_exact(ZERO, {}) == 0
    with pytest.raises(PoleAtPoint):
        eval_exact(g(U, V), {"s": 2, "u": 1, "v": 1})


def test_limit_examples():
    assert limit_with_factor(f(U, V), (U - V) / U, "u", V) == GAMMA
    assert limit_with_factor(U / (U + V), 1, "u", V) == RatScalar(Fraction(1, 2))
    with pytest.raises(ResidualPole):
        limit_with_factor(1 / (U - V) ** 2, U - V, "u", V)


def test_scaling_limit_examples():
    c = var("c")
    assert eps_limit(scaling_substitute(g(U, V), 2)) == 2 * c / (U - V)
    assert scaling_limit(ONE) == ONE
    assert scaling_limit(f(U, V) - 1) == 2 * c / (U - V)


def test_parse_rejects_garbage():
    with pytest.raises(GrammarError):
        parse("")


def test_sum_identities():
    for fn in (f, g, gt):
        assert fn(U, V) + fn(-U, V) == 2 * fn(U ** 2, V ** 2)


@given(rationals(), rationals(), rationals())
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a and a * b == b * a
    assert a - a == ZERO
    if nonzero(a):
        assert a * a.inv() == ONE


@given(rationals())
def test_string_round_trip(a):
    assert parse(a.to_string()) == a
    assert RatScalar.from_json(a.to_json()) == a


@given(laurent(), laurent().filter(nonzero), laurent(), laurent().filter(nonzero))
def test_cross_multiplication_equality(a, b, c, d):
    assert (a * d == c * b) == (a / b == c / d)


@given(rationals(), rationals(), st.lists(st.integers(2, P - 1), min_size=8, max_size=8))
def test_eval_mod_is_a_homomorphism(a, b, vals):
    pt = PrimePoint(P, vals)
    try:
        ea, eb, es, ep = (eval_mod_p(x, pt) for x in (a, b, a + b, a * b))
    except PoleAtPoint:
        return
    assert es % P == (ea + eb) % P
    assert ep % P == (ea * eb) % P


@given(laurent(), fractions, fractions, fractions)
def test_exact_and_modular_evaluation_agree(a, sv, uv, vv):
    exact = eval_exact(a, {"s": sv, "u": uv, "v": vv})
    res = [int(x.numerator) * pow(int(x.denominator), -1, P) % P for x in (sv, Fraction(1), uv, vv)]
    pt = PrimePoint(P, [res[0], 1, res[2], res[3], 1, 1, 1, 1])
    want = exact.numerator * pow(exact.denominator, -1, P) % P
    assert int(eval_mod_p(a, pt)) % P == want
