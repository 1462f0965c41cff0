import pytest
from hypothesis import given, strategies as st

from qloop.builders import model
from qloop.scalars import ONE, PoleAtPoint, PrimePoint, var
from qloop.tensor import DimMismatch, IndexOutOfRange, SparseMat, SparseVec
from strategies import laurent

P = 2 ** 62 - 57


@st.composite
def sparse_mat(draw, N=2, legs=1, density=4):
    dim = N ** legs
    entries = {}
    for _ in range(draw(st.integers(1, density))):
        rc = (draw(st.integers(0, dim - 1)), draw(st.integers(0, dim - 1)))
        entries[rc] = draw(laurent(max_terms=2))
    return SparseMat(N, legs, entries)


def test_constructors():
    assert SparseMat.permutation(4) * SparseMat.permutation(4) == SparseMat.identity(4, 2)
    assert SparseMat.unit(1, 2, 4) * SparseMat.unit(2, 3, 4) == SparseMat.unit(1, 3, 4)
    a, b = var("u"), var("v")
    assert sorted(SparseMat.diagonal([a, b]).entries()) == [(0, 0), (1, 1)]
    with pytest.raises(IndexOutOfRange):
        SparseMat.unit(0, 1, 3)


def test_embedding():
    R = model(2).R()
    r13 = R.embed([1, 3], 3)
    assert r13.dim == 64
    # R13 fixes leg 2: compare against the leg permutation of R12
    P23 = SparseMat.permutation(4).embed([2, 3], 3)
    assert P23 * R.embed([1, 2], 3) * P23 == r13
    assert SparseMat.identity(4, 2).embed([1, 3], 3) == SparseMat.identity(4, 3)
    r12, r34 = R.embed([1, 2], 4), R.subs({"u": var("w")}).embed([3, 4], 4)
    assert r12 * r34 == r34 * r12


def test_anti_transpose_examples():
    N = 4
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            assert SparseMat.unit(i, j, N).anti_transpose() == SparseMat.unit(N + 1 - j, N + 1 - i, N)
    m = model(2)
    assert m.D().anti_transpose() == m.Dinv()


def test_inverse_examples():
    a, b = var("u"), var("s") + 1
    assert SparseMat.diagonal([a, b]).invert() == SparseMat.diagonal([1 / a, 1 / b])
    U = model(2).U()
    assert U.invert() == U and U * U == SparseMat.identity(4)


def test_dim_mismatch():
    with pytest.raises(DimMismatch):
        SparseMat.identity(2) * SparseMat.identity(3)


@given(sparse_mat(N=2, legs=2, density=6))
def test_partial_anti_transpose_is_involution(A):
    assert A.anti_transpose([1]).anti_transpose([1]) == A
    assert A.anti_transpose().anti_transpose() == A


@given(sparse_mat(N=3), sparse_mat(N=3))
def test_transpose_reverses_products(A, B):
    assert (A * B).anti_transpose() == B.anti_transpose() * A.anti_transpose()
    assert (A * B).transpose() == B.transpose() * A.transpose()


@given(sparse_mat(N=2), sparse_mat(N=2))
def test_permutation_swaps_tensor_factors(A, B):
    Pm = SparseMat.permutation(2)
    assert Pm * A.kron(B) * Pm == B.kron(A)


@given(sparse_mat(N=2, legs=2), sparse_mat(N=2, legs=2))
def test_embed_respects_products(A, B):
    assert (A * B).embed([1, 3], 3) == A.embed([1, 3], 3) * B.embed([1, 3], 3)


@given(sparse_mat(N=3, density=5), sparse_mat(N=3, density=5), sparse_mat(N=3, density=2))
def test_associativity_and_identity(A, B, C):
    assert A * SparseMat.identity(3) == A
    assert (A * B) * C == A * (B * C)
    v = SparseVec(3, 1, {0: ONE, 2: var("u")})
    assert (A * B).mat_vec(v) == A.mat_vec(B.mat_vec(v))


@given(sparse_mat(N=3, density=6), sparse_mat(N=3, density=6),
       st.lists(st.integers(2, P - 1), min_size=8, max_size=8))
def test_modular_product_matches_exact(A, B, vals):
    pt = PrimePoint(P, vals)
    try:
        want = (A * B).eval_mod(pt)
        got = A.eval_mod(pt) @ B.eval_mod(pt)
    except PoleAtPoint:
        return
    assert {k: v % P for k, v in got.entries().items() if v % P} == \
        {k: v % P for k, v in want.entries().items() if v % P}


@given(st.lists(laurent(max_terms=2), min_size=16, max_size=16))
def test_random_inverse(vals):
    A = SparseMat(4, 1, {(k // 4, k % 4): x for k, x in enumerate(vals)})
    try:
        Ai = A.invert()
    except ArithmeticError:
        return
    assert A * Ai == SparseMat.identity(4)
