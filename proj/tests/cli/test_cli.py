"""End-to-end checks of the greedytrap command line."""

import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("GREEDYTRAP_CLI", "build/tools/greedytrap")
FIXTURES = Path(os.environ.get("GREEDYTRAP_FIXTURE_DIR", "fixtures"))


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.pop("GREEDYTRAP_THREADS", None)
    if env:
        full_env.update(env)
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=full_env)


def analyze_json(path, tmp_path, name="report.json"):
    out = tmp_path / name
    r = run("analyze", path, "--json", out)
    assert r.returncode == 0, r.stderr
    return json.loads(out.read_text()), r.stdout


def test_version():
    r = run("version")
    assert r.returncode == 0
    assert r.stdout.startswith("greedytrap ")


def test_usage_error_exit_code():
    assert run().returncode == 1
    assert run("simulate").returncode == 1
    assert run("bogus").returncode == 1


def test_analyze_decoy_fixture(tmp_path):
    rep, text = analyze_json(FIXTURES / "mab_failure.json", tmp_path)
    assert rep["verdict"] == "not self-identifiable"
    assert len(rep["decoys"]) == 1
    assert rep["branch"] == "Greedy fails for some warm-up data"
    assert "Greedy fails for some warm-up data" in text


def test_analyze_singleton(tmp_path):
    rep, _ = analyze_json(FIXTURES / "singleton.json", tmp_path)
    assert rep["verdict"] == "self-identifiable"
    assert rep["function_gap"] == "inf"
    assert rep["branch"] == "Greedy succeeds"


def test_analyze_reserialize_analyze(tmp_path):
    # round-trip through generate-free re-serialization: load, dump, analyze again
    src = FIXTURES / "grid_mab.json"
    rep1, text1 = analyze_json(src, tmp_path, "a.json")
    copy = tmp_path / "copy.json"
    copy.write_text(json.dumps(json.loads(src.read_text()), indent=1))
    rep2, text2 = analyze_json(copy, tmp_path, "b.json")
    rep1.pop("instance", None)
    rep2.pop("instance", None)
    assert rep1 == rep2
    assert text1.replace(str(src), "") == text2.replace(str(copy), "")


def test_schema_error_has_pointer(tmp_path):
    doc = json.loads((FIXTURES / "mab_failure.json").read_text())
    doc["class"][1] = [0.5]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    r = run("analyze", bad)
    assert r.returncode == 1
    assert "/class/1" in r.stderr


def test_generate_quadratic_verifies(tmp_path):
    out = tmp_path / "q.json"
    r = run("generate", "--family", "quadratic", "--eps", "0.25", "--gamma", "-1", "--mu", "0.5", "--c", "0.5",
            "--out", out)
    assert r.returncode == 0, r.stderr
    rep, _ = analyze_json(out, tmp_path)
    assert rep["decoy_hint_verified"] is True


def test_generate_lipschitz_without_decoy_arm(tmp_path):
    r = run("generate", "--family", "lipschitz", "--eps", "0.25", "--f", "0", "0", "4",
            "--metric", "[[0,4,4],[4,0,4],[4,4,0]]", "--out", tmp_path / "l.json")
    assert r.returncode == 1
    assert "no qualifying decoy arm" in r.stderr


@pytest.mark.parametrize("family", ["linear", "linear-cb-pos", "linear-cb-neg", "lipschitz", "lipschitz-cb",
                                    "polynomial", "quadratic", "l2ball"])
def test_generate_is_deterministic(tmp_path, family):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("generate", "--family", family, "--seed", 4, "--out", a).returncode == 0
    assert run("generate", "--family", family, "--seed", 4, "--out", b).returncode == 0
    assert a.read_bytes() == b.read_bytes()
    assert run("analyze", a).returncode == 0


def test_simulate_forced_e1_is_stuck(tmp_path):
    out = tmp_path / "sim"
    r = run("simulate", FIXTURES / "mab_failure.json", "--trials", 1, "--horizon", 100, "--sigma", 0,
            "--force-e1", "--out", out)
    assert r.returncode == 0, r.stderr
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stuck_fraction"] == 1.0
    assert summary["schema_version"] == 1
    rows = list(csv.DictReader((out / "trials.csv").open()))
    assert rows[0]["stuck"] == "1"


def test_simulate_reproducible_across_threads(tmp_path):
    outs = []
    for i, threads in enumerate(["1", "1", "4"]):
        out = tmp_path / f"s{i}"
        r = run("simulate", FIXTURES / "cb_failure.json", "--trials", 200, "--horizon", 300, "--seed", 9,
                "--out", out, env={"GREEDYTRAP_THREADS": threads})
        assert r.returncode == 0, r.stderr
        outs.append([(out / n).read_bytes() for n in ("trials.csv", "curve.csv", "summary.json")])
    assert outs[0] == outs[1] == outs[2]


def test_simulate_info_aware_is_sublinear(tmp_path):
    out = tmp_path / "ia"
    r = run("simulate", FIXTURES / "mab_failure.json", "--algo", "info-aware", "--trials", 50, "--horizon", 5000,
            "--out", out)
    assert r.returncode == 0, r.stderr
    summary = json.loads((out / "summary.json").read_text())
    assert summary["growth"]["verdict"] == "sublinear"


def test_simulate_dmso(tmp_path):
    out = tmp_path / "dm"
    r = run("simulate", FIXTURES / "dmso_decoy.json", "--algo", "greedy-mle", "--trials", 100, "--horizon", 200,
            "--out", out)
    assert r.returncode == 0, r.stderr
    summary = json.loads((out / "summary.json").read_text())
    assert summary["invariant_violations"] == 0


def test_estimate_pdec_no_decoy():
    r = run("estimate-pdec", FIXTURES / "mab_success.json", "--trials", 10)
    assert r.returncode == 1
    assert "no decoy" in r.stderr


def test_estimate_pdec_fields():
    r = run("estimate-pdec", FIXTURES / "mab_failure.json", "--trials", 500, "--horizon", 200)
    assert r.returncode == 0, r.stderr
    est = json.loads(r.stdout)
    lo, hi = est["wilson_ci_95"]
    assert lo <= est["p_hat"] <= hi
    for key in ("sigma", "decoy", "conditional_check"):
        assert key in est


def test_estimate_pdec_fixed_zero_sigma_is_degenerate():
    r = run("estimate-pdec", FIXTURES / "mab_failure.json", "--sigma-rule", "fixed:0", "--trials", 50,
            "--horizon", 100)
    assert r.returncode == 0, r.stderr
    est = json.loads(r.stdout)
    assert est["p_hat"] in (0.0, 1.0)
    assert est["sigma"] == 0.0
