import pytest
from hypothesis import given, strategies as st

from qloop.builders import Q, U_, model
from qloop.gauss import (
    GaussTriple, LSample, NotScalar, SingularMinor, anti_transpose, build_diagonal_L,
    central_scalars, check_dpm, check_invrel, dependent_k, diagonal_results, gauss_decompose,
    gauss_reconstruct, gauss_suite, hat, hat_decomposition, hat_from_coords, jimbo_gauge_k,
    random_L, random_k_list, random_symmetrized, random_triple, sample_results, sample_rng,
    schur_inner, tilde_alternating, tilde_coords, triple_round_trip, z_product, zc_matrix,
    zn_matrix, zp_matrix,
)
from qloop.scalars import RatScalar, substitute, var
from qloop.tensor import SparseMat

seeds = st.integers(0, 2 ** 31)


def failures(results):
    return [(label, w) for label, w in results if w is not None]


def test_two_by_two_example():
    t = gauss_decompose(LSample.from_lists([[2, 3], [4, 5]]))
    assert t.k == (RatScalar(2), RatScalar(-1))
    assert t.f(2, 1) == RatScalar(3) / 2
    assert t.e(1, 2) == RatScalar(2)
    assert hat_decomposition(LSample.from_lists([[2, 3], [4, 5]]), t) is None


def test_diagonal_sample():
    u, s = var("u"), var("s")
    L = LSample.from_lists([[u, 0, 0], [0, s, 0], [0, 0, u + 1]])
    t = gauss_decompose(L)
    assert t.F == {} and t.E == {}
    assert t.k == (u, s, u + 1)
    H = hat(L)
    assert [H[i, i] for i in (1, 2, 3)] == [1 / t.kk(3), 1 / t.kk(2), 1 / t.kk(1)]
    M, bad = schur_inner(L, t)
    assert bad is None and M == SparseMat.diagonal([s])


def test_singular_leading_minor():
    with pytest.raises(SingularMinor) as exc:
        gauss_decompose(LSample.from_lists([[0, 1], [1, 0]]))
    assert exc.value.k == 1


def test_short_chain_formulas():
    t = random_triple(sample_rng(4), 4)
    Ft, Et = tilde_coords(t)
    assert Ft[(2, 1)] == -t.f(2, 1)
    assert Ft[(3, 1)] == -t.f(3, 1) + t.f(3, 2) * t.f(2, 1)
    assert tilde_alternating(t, 3, 1, "F") == Ft[(3, 1)]
    assert check_invrel(t, Ft, Et) is None


@given(seeds, st.sampled_from([2, 3, 4]))
def test_round_trips(seed, N):
    rng = sample_rng(seed, N)
    L = random_L(rng, N)
    t = gauss_decompose(L)
    assert gauss_reconstruct(t).rows == L.rows
    assert triple_round_trip(random_triple(rng, N)) is None


@given(seeds, st.sampled_from([2, 3, 4]))
def test_sample_identities(seed, N):
    L = random_L(sample_rng(seed, N), N)
    assert failures(sample_results(L)) == []


@given(seeds)
def test_hat_coords_match_inverse(seed):
    L = random_L(sample_rng(seed, 3), 3, terms=1)
    t = gauss_decompose(L)
    assert hat_from_coords(t).rows == hat(L).rows


@given(seeds, st.sampled_from([2, 3]))
def test_symmetrized_samples(seed, n):
    L = random_symmetrized(sample_rng(seed, n), 2 * n)
    report = check_dpm(L)
    assert report.verdict == "pass", report.witness
    assert zp_matrix(L, n) == SparseMat.identity(2 * n)
    assert jimbo_gauge_k(L, n).verdict == "pass"


def test_generic_symmetrization_breaks_middle_relation():
    bad = 0
    for k in range(5):
        L = random_symmetrized(sample_rng(k, "plain"), 4, vanishing=False)
        bad += check_dpm(L).verdict == "fail"
    assert bad == 5


def test_generic_sample_is_not_central():
    L = random_L(sample_rng(1), 4)
    with pytest.raises(NotScalar):
        central_scalars(L, 2, ("Zc",))


@given(seeds, st.sampled_from([2, 3]))
def test_diagonal_from_k(seed, n):
    ks = random_k_list(sample_rng(seed, "k", n), n)
    assert failures(diagonal_results(ks, n)) == []
    L = build_diagonal_L(ks, n)
    assert jimbo_gauge_k(L, n).verdict == "pass"


def test_rank_two_z_formula():
    u = U_
    k1, k2 = var("s") * u + 1, u ** 2 + 3
    z = z_product([k1, k2], 2)
    at = lambda x, a: substitute(x, {"u": a})  # noqa: E731
    assert z == k2 * at(k2, -u) * at(k1, Q * u) / k1
    m = model(2)
    assert dependent_k([k1, k2], 2, 1, u) == z / at(k1, u / m.xi)


@given(seeds, st.sampled_from([2, 3]))
def test_central_family(seed, n):
    ks = random_k_list(sample_rng(seed, "c", n), n, central=True)
    L = build_diagonal_L(ks, n)
    cs = central_scalars(L, n)
    m = model(n)
    z = z_product(ks, n)
    assert cs.Zc == substitute(z, {"u": U_ * m.xi})
    assert cs.ZN == substitute(cs.Zc, {"u": U_ * m.xi}) / cs.Zc
    # the inversion-free ratios agree with the defining products
    assert zc_matrix(L, n) == SparseMat.identity(2 * n).scale(cs.Zc)
    assert zn_matrix(L, n) == SparseMat.identity(2 * n).scale(cs.ZN)


def test_triple_json():
    t = gauss_decompose(LSample.from_lists([[2, 3], [4, 5]]))
    assert isinstance(t, GaussTriple)
    doc = t.to_json()
    assert doc["N"] == 2 and len(doc["k"]) == 2


def test_anti_transpose_involution():
    L = random_L(sample_rng(8), 4)
    assert anti_transpose(anti_transpose(L)).rows == L.rows


@pytest.mark.parametrize("N", [2, 4])
def test_small_suite(N):
    report = gauss_suite(N, samples=3, seed=11)
    assert report.verdict == "pass", report.witness
