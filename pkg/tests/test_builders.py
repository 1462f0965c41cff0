from fractions import Fraction

import numpy as np
import pytest

from qloop.builders import Q, S, U_, V_, f, g, gt, half_f, model, rational_Q, rational_R
from qloop.scalars import (
    ONE, PrimePoint, eval_mod_p, scaling_substitute, substitute, var,
)
from qloop.tensor import SparseMat

P = 2 ** 62 - 57


def test_bar_index():
    m = model(3)
    assert [m.bar(i) for i in range(1, 7)] == [Fraction(3, 2), Fraction(1, 2), 0, 0,
                                               Fraction(-1, 2), Fraction(-3, 2)]
    for n in range(2, 6):
        m = model(n)
        assert m.bar(n) == m.bar(n + 1) == 0
        assert m.bar(1) == n - Fraction(3, 2)
    D = model(3).D()
    assert [D[i, i] for i in range(6)] == [S ** 6, S ** 2, ONE, ONE, S ** -2, S ** -6]


def test_xi_is_an_integer_power_of_s():
    for n in range(1, 6):
        m = model(n)
        assert m.y == S ** (2 * (1 - n))
        assert m.xi == m.y ** 2


@pytest.mark.parametrize("n", range(1, 6))
def test_structural_matrices(n):
    m = model(n)
    N = m.N
    I = SparseMat.identity(N)
    U, D, UU = m.U(), m.D(), m.UU()
    assert U * U == I
    assert UU * m.UUinv() == I
    assert D * U == U * D
    assert UU * U == U * UU
    assert D.anti_transpose() == m.Dinv()
    assert UU.anti_transpose() == UU
    assert m.prime(1) == N and m.prime(N) == 1


def test_x_is_u_invariant():
    m = model(3)
    U1 = m.U().kron(SparseMat.identity(6))
    assert U1 * m.X() * U1 == m.X()


def test_p_matches_entrywise_sum():
    m = model(2)
    N = 4
    want = SparseMat.zero(N, 2)
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            want = want + SparseMat.unit(j, i, N).kron(SparseMat.unit(i, j, N)).scale(m.p(i, j, U_, V_))
    rng = np.random.default_rng(5)
    pt = PrimePoint(P, [int(x) for x in rng.integers(2, P, size=8, dtype=np.int64)])
    assert m.P(U_, V_).eval_mod(pt).entries() == want.eval_mod(pt).entries()


def test_rj_forms_agree_at_n2():
    m = model(2)
    assert m.RJ(form="structured") == m.RJ(form="compact")


def test_rj_diagonal_entry():
    m = model(3)
    RJ = m.RJ()
    for i in (1, 2):
        idx = (i - 1) * 6 + i - 1
        assert RJ[idx, idx] == f(U_ ** 2, V_ ** 2)


def test_rj_forms_agree_modularly_at_n3():
    m = model(3)
    a, b = m.RJ(form="structured"), m.RJ(form="compact")
    rng = np.random.default_rng(9)
    for _ in range(20):
        pt = PrimePoint(P, [int(x) for x in rng.integers(2, P, size=8, dtype=np.int64)])
        assert a.eval_mod(pt).entries() == b.eval_mod(pt).entries()


@pytest.mark.parametrize("n", [2, 3])
def test_r_variants_agree(n):
    m = model(n)
    assert m.R(variant="conj") == m.R()
    assert m.R(variant="qtilde") == m.R()


def test_literal_qtilde_weights_differ():
    m = model(2)
    assert m.R(variant="qtilde-literal") != m.R()


def test_rank_one_r_is_diagonal():
    m = model(1)
    R = m.R()
    assert all(r == c for (r, c), _ in R.items())
    assert R[0, 0] == half_f(U_, V_) * half_f(V_, -U_)
    assert R[1, 1] == half_f(U_, -V_) * half_f(V_, U_)


def test_qtilde_is_even_in_y():
    m = model(3, "generic")
    y = var("y")
    qt = m.Qtilde(U_, V_)
    assert qt.map(lambda x: substitute(x, {"y": -y})) == qt


def test_rational_r():
    Qr = rational_Q(3)
    Pm = SparseMat.permutation(6)
    assert Qr == Pm.anti_transpose([1]) == Pm.anti_transpose([2])
    assert model(3).kappa == 2
    c = var("c")
    assert rational_R(3)[0, 0] == 1 + c / (U_ - V_)


def test_specialization_at_v_equal_qu():
    at = {"v": Q * U_}
    assert substitute(f(U_ ** 2, V_ ** 2), at) == 0
    assert substitute(g(U_ ** 2, V_ ** 2), at) == -1 / Q
    assert substitute(gt(U_ ** 2, V_ ** 2), at) == -Q
    for sign in (1, -1):
        assert substitute(g(sign * U_, V_), at) == -(1 / Q + sign)
        assert substitute(gt(sign * U_, V_), at) == -(Q + sign)


def test_alpha_vanishes_to_second_order():
    alpha = Q - 2 + 1 / Q
    sub = scaling_substitute(alpha, 3)
    eps = var("eps")
    assert substitute(sub, {"eps": 0}) == 0
    assert substitute(sub / eps, {"eps": 0}) == 0
    assert substitute(sub / eps ** 2, {"eps": 0}) != 0


def test_modular_r_evaluation_is_consistent():
    R = model(2).R()
    rng = np.random.default_rng(2)
    pt = PrimePoint(P, [int(x) for x in rng.integers(2, P, size=8, dtype=np.int64)])
    mod = R.eval_mod(pt)
    for (r, c), v in R.items():
        assert mod[r, c] % P == eval_mod_p(v, pt) % P
