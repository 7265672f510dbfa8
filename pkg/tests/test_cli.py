import json

import pytest
from click.testing import CliRunner

from tmdpsc.cli import main

MACHINES = {
    "halt1.tm": "states 2\n1 0 1 R 0\n",
    "halt2.tm": "states 2\n1 0 1 R 0\n1 1 1 R 1\n",
    "loop.tm": "states 2\n1 0 0 R 1\n",
    "from_halt.tm": "states 2\n1 0 1 R 0\n0 1 1 R 1\n",
    "garbage.tm": "states two\n",
}


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("machines")
    for name, text in MACHINES.items():
        (d / name).write_text(text)
    return d


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_build(files, tmp_path):
    r = invoke("build", files / "halt1.tm", "--out", tmp_path / "a.json")
    assert r.exit_code == 0
    assert r.output.splitlines()[:2] == ["labels 48", "ops 17"]
    assert "op S2 5" in r.output
    assert len(json.loads((tmp_path / "a.json").read_text())["labels"]) == 48
    r = invoke("build", files / "halt1.tm", "--omit-K", "--json")
    doc = json.loads(r.output)
    assert len(doc["ops"]) == 16 and ["K", 3] not in doc["ops"]


@pytest.mark.parametrize("name", ["from_halt.tm", "garbage.tm", "missing.tm"])
def test_bad_machine_exit_2(files, name):
    for cmd in ("build", "suite"):
        r = invoke(cmd, files / name)
        assert r.exit_code == 2, r.output
        assert "Error" in r.output


def test_halting_source_reports_line(files):
    r = invoke("build", files / "from_halt.tm")
    assert "line 3" in r.output


def test_cg():
    assert invoke("cg", "S3", "b_2", "0").output.strip() == "{0, b_1, b_2}"
    assert invoke("cg", "W", "H", "H").output.strip() == "identity"
    assert invoke("cg", "W", "H", "0").output.strip() == "{0, H, D}"
    assert invoke("cg", "TwoElt", "C", "0").output.startswith("full")
    r = invoke("cg", "W", "H", "nope")
    assert r.exit_code == 2


def test_cg_with_machine(files):
    r = invoke("cg", "A", "C", "0", "--tm", files / "halt1.tm")
    assert r.exit_code == 0 and r.output.startswith("full (48 ")


def test_si():
    out = invoke("si", "W").output.splitlines()
    assert out == ["algebra W size 4", "si yes", "monolith {0, D}", "small W (isomorphic)"]
    assert "si no" in invoke("si", "S2").output
    assert "small W" in invoke("si", "S2-").output
    assert invoke("si", "Nope").exit_code == 2


def test_quotient(files, tmp_path):
    good = tmp_path / "good.spec"
    good.write_text("N 0 3\nP 1@3:0:1110\n")
    r = invoke("quotient", good, "--tm", files / "halt2.tm")
    assert r.exit_code == 0, r.output
    assert "CHECK monolith PASS" in r.output
    bad = tmp_path / "bad.spec"
    bad.write_text("N 0 3\nP 0@3:0:0000\n")
    r = invoke("quotient", bad, "--tm", files / "halt2.tm")
    assert r.exit_code == 1 and "FAIL" in r.output


def test_gamma(files):
    r = invoke("gamma", files / "loop.tm", "--start", -5)
    lines = r.output.splitlines()
    assert r.exit_code == 0 and len(lines) == 12
    assert all(" PASS " in x for x in lines[1:])
    assert invoke("gamma", files / "loop.tm", "--window", 1).exit_code == 2
    doc = json.loads(invoke("gamma", files / "loop.tm", "--steps", 3, "--json").output)
    assert [c["id"] for c in doc["checks"]] == ["step-0", "step-1", "step-2", "step-3"]


def test_formula():
    names = invoke("formula").output.split()
    assert names[0] == "psi_S" and "Gamma" in names and "zeta" in names
    r = invoke("formula", "psi_2")
    assert r.output.strip() == "(define (psi_2 w x y z) (exists t (and (psi_1 w t y z) (psi_1 x t y z))))"
    assert invoke("formula", "bogus").exit_code == 2


def test_formula_check():
    r = invoke("formula", "--alg", "W", "--check")
    assert r.exit_code == 0
    assert len([x for x in r.output.splitlines() if x.startswith("CHECK")]) == 12


def test_tm(files):
    r = invoke("tm", files / "halt1.tm")
    assert r.output.splitlines() == ["0 1@0:0:0", "1 0@1:0:10", "halted"]
    r = invoke("tm", files / "loop.tm", "--steps", 3)
    assert r.output.splitlines()[-1] == "running"
    assert invoke("tm", files / "loop.tm", "--start", "x").exit_code == 2


def test_suite_subset(files):
    r = invoke("suite", files / "loop.tm", "--only", "counts", "--only", "gamma", "--only", "zero-absorption")
    assert r.exit_code == 0, r.output
    lines = r.output.splitlines()
    assert lines[0].startswith("# machine=") and "level=quick seed=0" in lines[0]
    assert all(" PASS " in x for x in lines[1:])


def test_suite_machine_skip(files):
    r = invoke("suite", files / "halt1.tm", "--only", "machine")
    assert r.exit_code == 0
    assert " SKIP " in r.output


def test_suite_json_deterministic(files):
    args = ["suite", files / "halt2.tm", "--only", "machine", "--only", "chains", "--json"]
    one = invoke(*args, "--workers", 1)
    two = invoke(*args, "--workers", 2)
    assert one.exit_code == 0, one.output
    assert one.output == two.output
    doc = json.loads(one.output)
    assert all("seconds" not in c for c in doc["checks"])
    assert {c["status"] for c in doc["checks"]} == {"PASS"}


def test_suite_trace(files):
    r = invoke("suite", files / "loop.tm", "--only", "chains", "--trace")
    assert r.exit_code == 0
    assert any(x.startswith("# chain ") for x in r.output.splitlines())


def test_suite_timing(files):
    r = invoke("suite", files / "loop.tm", "--only", "counts", "--timing")
    assert r.output.splitlines()[1].endswith("s]")
