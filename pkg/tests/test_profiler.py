import json

import pytest

from profiler.acceptance import (
    BASE,
    SYNTHETIC,
    attack_efficacy,
    defense_efficacy,
    make_config,
    multi_attacker,
)
from profiler.benchmark_grad_check import TOLERANCE, benchmark, random_case
from pycontamination.nn_core import grad_check
from pycontamination.runner import load_data


def test_random_case_shapes():
    model, batch = random_case(3, 64, seed=0)
    assert model.config.layer_sizes == (10, 64, 32, 4)
    assert batch.features.shape == (6, 10)
    assert grad_check(model, batch) < TOLERANCE


def test_benchmark_resumes(tmp_path):
    output_json = tmp_path / "grad_check.json"
    output_json.write_text(json.dumps({"depth1_width8": {"passed": True, "kept": 1}}))
    results = benchmark(str(output_json), seed=1)
    assert len(results) == 9
    assert results["depth1_width8"] == {"passed": True, "kept": 1}
    assert all(r["passed"] for r in results.values())
    assert json.loads(output_json.read_text()) == results


def test_make_config_merges_sections():
    cfg = make_config(3, model={"epochs": 2}, defense={"c_weight": 3.0})
    assert cfg.repetitions == 3
    assert cfg.config["model"]["hidden_sizes"] == [64, 32]
    assert cfg.config["model"]["epochs"] == 2
    assert cfg.defense_config().c_weight == 3.0
    assert BASE["model"]["epochs"] == 30
    cfg.validate()


def test_contaminated_value_is_rare_and_outside_the_rule():
    data = load_data(make_config(1))
    rare = data.column("cat_0") == 1
    assert rare.mean() < 0.05
    assert 0 not in SYNTHETIC["rule_attributes"]


@pytest.mark.slow
def test_attack_efficacy():
    result = attack_efficacy(seeds=10, jobs=4)
    assert result["attacked"] - result["clean"] >= 0.15, result


@pytest.mark.slow
def test_defense_efficacy():
    result = defense_efficacy(seeds=10, jobs=4)
    assert result["contamination_gap"] <= 0.05, result
    assert result["validation_margin"] >= 0, result


@pytest.mark.slow
def test_multi_attacker_defense():
    result = multi_attacker(seeds=10, jobs=4)
    for count in range(1, 8):
        assert result["defended"][count] < result["undefended"][count], result
