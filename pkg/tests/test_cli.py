import json
import subprocess
import sys

import pytest

from unmeasure import __version__
from unmeasure.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_divergence_value(capsys):
    code, out, _ = call(capsys, "divergence", "--p", '{"weights":[2]}', "--q", '{"weights":[1]}')
    assert code == 0
    d = json.loads(out)
    assert d["divergence"] == pytest.approx(2 * 0.6931471805599453 - 1, abs=1e-15)
    assert d["version"] == __version__ and d["seed"] == 0 and d["command"] == "divergence"


def test_infinite_divergence_is_a_string(capsys):
    code, out, _ = call(capsys, "divergence", "--p", '{"weights":[1,1]}', "--q", '{"weights":[1,0]}')
    assert code == 0 and json.loads(out)["divergence"] == "inf"


def test_domain_error_exit_one(capsys):
    code, out, err = call(capsys, "divergence", "--p", '{"weights":[-1]}', "--q", '{"weights":[1]}')
    assert code == 1 and out == ""
    e = json.loads(err)
    assert e["error"] == "NegativeWeightError" and e["message"]


def test_usage_errors_exit_two(capsys):
    for argv in ([], ["nope"], ["divergence", "--p", "{bad"], ["thin", "--alpha", "0.5"],
                 ["dutchbook", "--matrix", "@/no/such/file"]):
        code, _, err = call(capsys, *argv)
        assert code == 2, argv
        assert json.loads(err)["error"] == "UsageError"


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("UNMEASURE_SEED", "17")
    _, out, _ = call(capsys, "ineq-scan", "--base", "poisson", "--samples", "200")
    assert json.loads(out)["seed"] == 17
    _, out, _ = call(capsys, "ineq-scan", "--base", "poisson", "--samples", "200", "--seed", "3")
    assert json.loads(out)["seed"] == 3
    monkeypatch.setenv("UNMEASURE_SEED", "x")
    assert call(capsys, "ineq-scan", "--base", "poisson", "--samples", "10")[0] == 2


def test_gof_csv_and_gap(capsys, tmp_path):
    gap = tmp_path / "gap.json"
    code, out, _ = call(capsys, "gof-poisson", "--intensity", "5", "--gap-out", str(gap))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith(f"# unmeasure {__version__} command=gof-poisson seed=0")
    assert lines[1].split(",")[0]
    g = json.loads(gap.read_text())
    assert 0 <= g["gap"] <= 1
    code, out, _ = call(capsys, "gof-classical", "--n", "20")
    assert code == 0 and out.startswith("# unmeasure")


def test_thin_and_thin_law(capsys):
    code, out, _ = call(capsys, "thin", "--poisson", "3", "--alpha", "0.5")
    assert code == 0 and json.loads(out)["mean"] == pytest.approx([1.5], abs=1e-10)
    code, out, _ = call(capsys, "thin-law", "--bernoulli", "0.3,0.2", "--n-list", "1,4,16")
    assert code == 0
    rows = out.splitlines()[2:]
    div = [float(r.split(",")[1]) for r in rows]
    assert div == sorted(div, reverse=True)


def test_project_and_altmin(capsys, tmp_path):
    q = json.dumps({"weights": [1 / 6] * 6})
    cons = json.dumps({"equalities": [{"g": [1, 2, 3, 4, 5, 6], "target": 4.5}], "probability": True})
    code, out, _ = call(capsys, "project", "--q", q, "--constraints", cons)
    assert code == 0
    w = json.loads(out)["q_star"]["weights"]
    assert w[-1] == pytest.approx(0.3474940658, abs=1e-9)
    for variant in ("normalized-cyclic", "unnormalized-cyclic", "orthogonalized"):
        path = tmp_path / f"{variant}.csv"
        code, _, _ = call(capsys, "altmin", "--q", q, "--constraints", cons, "--variant", variant, "--out", str(path))
        assert code == 0
        assert path.read_text().splitlines()[1] == "cycle,divergence,max_residual,total_mass"


def test_malformed_constraints_are_a_domain_error(capsys):
    code, _, err = call(capsys, "project", "--q", '{"weights":[1,1]}', "--constraints", '{"equalities":[{"f":[1,2]}]}')
    assert code == 1 and json.loads(err)["error"] == "UnmeasureError"


def test_dutchbook_file_input(capsys, tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("w1,w2\n-1,-2\n0.5,-1\n")
    code, out, _ = call(capsys, "dutchbook", "--matrix", f"@{m}")
    d = json.loads(out)
    assert code == 0 and d["certificate"]["branch"] == "ARBITRAGE" and d["verified"]


def test_mach_zehnder(capsys, tmp_path):
    qq = tmp_path / "qq.csv"
    code, out, _ = call(capsys, "mach-zehnder", "--scenario", "blocked", "--intensity", "4",
                        "--observation", "3,1", "--qq-out", str(qq))
    assert code == 0 and qq.exists()
    assert json.loads(out)["divergence"] >= 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "unmeasure", "divergence", "--p", '{"weights":[1]}',
                        "--q", '{"weights":[1]}'], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["divergence"] == 0
