import json

import pytest
from hypothesis import given, strategies as st

from qloop.rll import (
    QU, U_ARG, Arg, GenSym, NCExpr, all_relations, dumps_relations, e2_closed_form, e2_results,
    e3_expected, e3_results, export_relations, extract_rll, fused_component, load_relations,
    oracle_agreement, proportional, specialized_span_contains, twist_invariance,
)
from qloop.scalars import ONE, RatScalar


def failing(results):
    return [label for label, w in results if w is not None]


def test_relation_count():
    assert len(all_relations(2)) == 256
    assert len(all_relations(1)) == 16


def test_diagonal_component_shape():
    e = extract_rll(2, "+", "+", (1, 1, 1, 1))
    words = {w for w, _ in e.terms()}
    a = (GenSym("+", 1, 1, Arg("u")), GenSym("+", 1, 1, Arg("v")))
    b = (GenSym("+", 1, 1, Arg("v")), GenSym("+", 1, 1, Arg("u")))
    assert words == {a, b}
    assert e.coeff(a) == -e.coeff(b)


def test_arguments_parse_and_print():
    for text in ("u", "v", "q*u", "q^2*v", "-u", "q^-1*u"):
        assert str(Arg.parse(text)) == text
    assert Arg("v").sub_v(1) == QU
    with pytest.raises(ValueError):
        Arg("w")


def test_words_are_not_reordered():
    x, y = GenSym("+", 1, 2, U_ARG), GenSym("+", 2, 1, QU)
    assert NCExpr.word(x, y) != NCExpr.word(y, x)
    assert (NCExpr.word(x, y) - NCExpr.word(x, y)).is_zero()


@given(st.integers(-3, 3), st.integers(-3, 3))
def test_linear_structure(a, b):
    x, y = GenSym("+", 1, 2, U_ARG), GenSym("-", 3, 1, QU)
    e = NCExpr.word(x, y, coeff=RatScalar(a)) + NCExpr.word(y, x, coeff=RatScalar(b))
    assert e.scale(ONE) == e
    assert (e + e.scale(RatScalar(-1))).is_zero()
    assert NCExpr.from_json(json.loads(json.dumps(e.to_json()))) == e


def test_e2_rank_two():
    assert failing(e2_results(2)) == []
    rll_side, llr_side = fused_component(2, 2, 2)
    assert rll_side == e2_closed_form(2, 2, 2, "RLL")
    assert llr_side == e2_closed_form(2, 2, 2, "LLR")
    assert len(rll_side) == 3


def test_e2_rank_three_first_case():
    rll_side, _ = fused_component(3, 2, 5)
    assert rll_side == e2_closed_form(3, 2, 5, "RLL")
    assert len(rll_side) == 2
    assert failing(e2_results(3)) == []


def test_e3_examples():
    got = extract_rll(2, "+", "+", (2, 1, 1, 1)).specialize_v(1)
    assert proportional(got, e3_expected(2, 2))
    assert len(e3_expected(2, 2)) == 3
    got = extract_rll(3, "+", "+", (2, 1, 1, 1)).specialize_v(1)
    assert proportional(got, e3_expected(3, 2))
    assert len(e3_expected(3, 2)) == 2


@pytest.mark.parametrize("n", [2, 3])
def test_e3_below_the_last_index(n):
    N = 2 * n
    bad = failing(e3_results(n))
    assert bad == [f"column relation i={N}", f"row relation j={N}"]


@pytest.mark.xfail(strict=True, reason="the i = 2n relation involves the crossing term of R and "
                                       "is not a consequence of the v = qu specialization")
@pytest.mark.parametrize("n", [2, 3])
def test_e3_last_index(n):
    assert failing(e3_results(n)) == []


def test_last_index_leading_part_has_crossing_terms():
    got, order = extract_rll(2, "+", "+", (4, 1, 1, 1)).leading_at_v(1)
    assert order == 1
    words = {(w[0].i, w[1].i) for w, _ in got.terms()}
    assert (2, 2) in words and (3, 3) in words


def test_oracle_rank_two():
    assert oracle_agreement(2, points=3, seed=4) is None


def test_twist():
    assert twist_invariance(2) is None
    assert twist_invariance(3) is None


def test_export_round_trip(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    h1 = export_relations(2, p1)
    h2 = export_relations(2, p2)
    assert h1 == h2
    loaded = load_relations(p1)
    assert len(loaded) == 256
    assert [(c, e) for c, _, _, e in loaded] == all_relations(2)
    assert json.loads(dumps_relations(2))[0]["component"] == [1, 1, 1, 1]


def test_text_export(tmp_path):
    export_relations(1, tmp_path / "r.txt", "text")
    assert len((tmp_path / "r.txt").read_text().splitlines()) == 16


def test_specialization_pole_is_reported():
    from qloop.verifier import SpecializationPole
    with pytest.raises(SpecializationPole):
        extract_rll(2, "+", "+", (4, 1, 1, 1)).specialize_v(1)


def test_mixed_signs_emitted():
    e = extract_rll(2, "+", "-", (1, 1, 1, 1))
    assert {g.sign for w, _ in e.terms() for g in w} == {"+", "-"}


@pytest.mark.parametrize("n", [2, 3])
def test_last_index_relation_is_not_derivable(n):
    N = 2 * n
    assert specialized_span_contains(n, e3_expected(n, 2))
    assert not specialized_span_contains(n, e3_expected(n, N))
