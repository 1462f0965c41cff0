import json
import subprocess
import sys

import pytest

from qloop.cli import dispatch
from qloop.tensor import SparseMat


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def strip_timing(doc):
    for r in doc["reports"]:
        r.pop("timing", None)
    return doc


def test_build_matrix_json(tmp_path, capsys):
    out = tmp_path / "R3.json"
    code, _, _ = run(["build", "R", "--n", "3", "--variant", "qtilde", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["N"] == 6 and doc["legs"] == 2
    M = SparseMat.from_json(doc)
    assert M.dim == 36 and M.nnz() == len(doc["entries"])
    for e in doc["entries"]:
        assert {"r", "c", "num", "den"} <= set(e)


def test_build_other_matrices(capsys):
    for name, variant in [("RJ", "structured"), ("U", None), ("Q", "qtilde"), ("R", "rational")]:
        argv = ["build", name, "--n", "2"] + (["--variant", variant] if variant else [])
        code, out, _ = run(argv, capsys)
        assert code == 0, name
        assert json.loads(out)["matrix"] == name


def test_check_passes_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["check", "crossing", "--n", "2", "--seed", "7", "--out", str(a)], capsys)[0] == 0
    assert run(["check", "crossing", "--n", "2", "--seed", "7", "--out", str(b)], capsys)[0] == 0
    assert strip_timing(json.loads(a.read_text())) == strip_timing(json.loads(b.read_text()))


def test_generic_xi_ybe_fails_with_witness(capsys):
    code, out, _ = run(["check", "ybe", "--n", "2", "--xi-mode", "generic"], capsys)
    assert code == 1
    report = json.loads(out)["reports"][0]
    assert report["verdict"] == "fail" and report["witness"]


def test_modular_checks_need_a_seed(capsys):
    code, _, err = run(["check", "ybe", "--n", "3"], capsys)
    assert code == 2 and "--seed" in err


@pytest.mark.parametrize("argv", [
    ["build", "X"],
    ["check", "nope", "--seed", "1"],
    ["rll", "nope"],
    ["gauss", "nope", "--seed", "1"],
    ["export", "nope"],
    ["build", "R", "--variant", "structured"],
    ["check", "ybe", "--prime-index", "9", "--seed", "1", "--mode", "modular"],
    ["build", "R", "--bogus"],
    ["build", "R", "--n", "0"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


def test_gauss_commands(tmp_path, capsys):
    path = tmp_path / "L.json"
    path.write_text(json.dumps({"rows": [["2", "3"], ["4", "5"]]}))
    code, out, _ = run(["gauss", "decompose", "--input", str(path)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["triple"]["k"] == [{"num": "2", "den": "1"}, {"num": "-1", "den": "1"}]
    for op in ("dpm", "central", "suite"):
        code, _, _ = run(["gauss", op, "--n", "2", "--seed", "3", "--samples", "2"], capsys)
        assert code == 0, op


def test_internal_error_exit_code(tmp_path, capsys):
    path = tmp_path / "L.json"
    path.write_text(json.dumps([["0", "1"], ["1", "0"]]))
    code, _, err = run(["gauss", "decompose", "--input", str(path)], capsys)
    assert code == 3 and "SingularMinor" in err


def test_rll_commands(tmp_path, capsys):
    code, out, _ = run(["rll", "count", "--n", "2"], capsys)
    assert code == 0 and json.loads(out)["relations"] == 256
    assert run(["rll", "e2", "--n", "2"], capsys)[0] == 0
    assert run(["rll", "twist", "--n", "2"], capsys)[0] == 0
    assert run(["rll", "oracle", "--n", "1", "--points", "2", "--seed", "1"], capsys)[0] == 0
    assert run(["rll", "e3", "--n", "2"], capsys)[0] == 1
    out_path = tmp_path / "rel.json"
    code, out, _ = run(["export", "relations", "--n", "2", "--out", str(out_path)], capsys)
    assert code == 0
    assert len(json.loads(out_path.read_text())) == 256
    assert len(json.loads(out)["sha256"]) == 64


def test_text_format(capsys):
    code, out, _ = run(["check", "poles", "--n", "2", "--format", "text"], capsys)
    assert code == 0 and out.startswith("poles pass")


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qloop.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "qloop" in proc.stdout
