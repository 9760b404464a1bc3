import json
import math
import pathlib

import pytest

import greedytrap as gt

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "fixtures"


def test_version_string():
    assert gt.__version__.count(".") == 2


def test_decoy_instance_analysis():
    inst = gt.ProblemInstance([[[0.5, 0.9]], [[0.5, 0.3]]], true_index=0, sigma=0.1)
    assert not gt.is_self_identifiable(inst)
    decoys = gt.find_decoys(inst)
    assert len(decoys) == 1
    assert decoys[0].member == 1
    assert decoys[0].decoy_policy == [0]
    assert gt.verify_certificate(inst, decoys[0]) == ""


def test_singleton_gap_is_infinite():
    inst = gt.ProblemInstance([[[0.2, 0.6]]], true_index=0, sigma=0.1)
    assert math.isinf(gt.function_gap(inst))
    assert gt.is_self_identifiable(inst)


def test_forced_e1_is_always_stuck():
    inst, decoy = gt.fixture_mab_failure()
    cfg = gt.ExperimentConfig()
    cfg.horizon, cfg.trials, cfg.master_seed, cfg.force_e1 = 100, 20, 3, True
    res = gt.estimate_stuck_probability(inst.with_sigma(0.0), decoy, cfg)
    assert res.stuck.p_hat == 1.0
    assert res.invariant_violations == 0


def test_threads_do_not_change_results():
    inst, decoy = gt.fixture_mab_failure()
    out = []
    for threads in (1, 4):
        cfg = gt.ExperimentConfig()
        cfg.horizon, cfg.trials, cfg.master_seed, cfg.threads = 200, 300, 11, threads
        res = gt.estimate_stuck_probability(inst, decoy, cfg)
        out.append(([t.final_regret for t in res.trials], res.mean_regret))
    assert out[0] == out[1]


def test_wilson_and_sigma_rule():
    ci = gt.wilson_interval(0, 100)
    assert ci.lo == 0.0 and 0.0 < ci.hi < 0.05
    sigma = gt.e2_sigma(0.3)
    u = math.exp(-0.3**2 / (2 * sigma**2))
    assert 2 * u / (1 - u) == pytest.approx(0.1, rel=1e-12)


def test_instance_roundtrip():
    text = (FIXTURES / "grid_mab.json").read_text()
    once = gt.roundtrip_instance_text(text)
    assert gt.roundtrip_instance_text(once) == once
    doc = json.loads(once)
    assert doc["class"][0][2] == {"numerator": 9, "eps": 0.1}


def test_schema_error_has_pointer():
    with pytest.raises(ValueError, match="/class/1"):
        gt.roundtrip_instance_text(
            json.dumps({"schema_version": 1, "kind": "mab", "arms": 2, "sigma": 0.1,
                        "class": [[0.1, 0.2], [0.1]], "true_index": 0}))
