import pytest

from qloop.verifier import (
    CHECKS, check_fusion_lemma, check_four_leg_lemma, check_poles, check_ybe, prime_table,
    random_perturbations, run_all, run_check, twist_samples,
)


def verdicts(reports):
    return {r.name: r.verdict for r in reports}


def test_full_suite_rank_two_exact():
    reports = run_all(2, seed=0)
    assert verdicts(reports) == {name: "pass" for name in CHECKS}


def test_rank_one_skips_what_does_not_apply():
    v = verdicts(run_all(1, seed=0))
    assert {k for k, x in v.items() if x == "skipped"} == {"poles", "embedding", "fusion", "four_leg"}
    assert all(x in ("pass", "skipped") for x in v.values())


@pytest.mark.parametrize("name", ["ybe", "unitarity", "crossing", "poles", "equivalences",
                                  "embedding", "fusion", "scaling_limit"])
def test_rank_three_modular(name):
    r = run_check(name, 3, seed=1)
    assert r.verdict == "pass", r.witness


def test_modular_stats_bound_failure_probability():
    r = run_check("ybe", 3, seed=0)
    assert r.params["mode"] == "modular"
    assert r.stats["points_used"] == 40
    assert len(r.params["primes"]) == 2
    assert r.stats["degree_estimate"] < 2 ** 16
    assert r.stats["failure_bound_log2"] < -80


def test_generic_xi_breaks_ybe():
    r = check_ybe(2, xi_mode="generic")
    assert r.verdict == "fail"
    assert r.witness and "entry" in r.witness


def test_perturbations_are_detected():
    for pert in random_perturbations(2, seed=3, count=3):
        r = check_ybe(2, mode="modular", seed=0, points=2, perturb=pert)
        assert r.verdict == "fail", pert
        assert r.witness is not None


def test_literal_qtilde_weights_break_ybe():
    assert check_ybe(2, mode="modular", points=2, variant="qtilde-literal").verdict == "fail"


def test_reports_are_deterministic():
    a = [r.to_json(timing=False) for r in run_all(2, seed=5)]
    b = [r.to_json(timing=False) for r in run_all(2, seed=5)]
    assert a == b


def test_poles_rank_three_include_central_reduction():
    labels = {d["label"]: d["verdict"] for d in check_poles(3).details}
    assert labels["xi^2 pole: residue of the inverse"] == "pass"
    assert labels["residue at u = v xi"] == "pass"


def test_four_leg_consistent_with_fusion_at_rank_two():
    assert check_fusion_lemma(2).verdict == "pass"
    assert check_four_leg_lemma(2).verdict == "pass"


def test_twist_samples_satisfy_constraint():
    for theta, _ in twist_samples(3, seed=2):
        vals = [theta[i, i] for i in range(6)]
        c = vals[0] * vals[5]
        assert vals[1] * vals[4] == c and vals[2] * vals[3] == c
        assert vals[2] == vals[3]


def test_prime_override(monkeypatch):
    monkeypatch.setenv("QLOOP_PRIMES", "4611686018427387847")
    assert prime_table() == (4611686018427387847,)
    monkeypatch.setenv("QLOOP_PRIMES", "15")
    with pytest.raises(ValueError):
        prime_table()


def test_unknown_check():
    with pytest.raises(KeyError):
        run_check("nope", 2)
