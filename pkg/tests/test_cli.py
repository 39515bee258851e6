import json
import math

import pandas as pd
import pytest

from chainfis.indicators import (
    DEFAULT_INPUTS,
    DEFAULT_OUTPUTS,
    dump_dataset,
    load_reference_dataset,
)
from chainfis.model_io import get_model_rule_count, load_model
from chainfis.scripts.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, SEED_ENVVAR, run_command

SMALL_SCENARIO = {
    "horizon_days": 8,
    "replications": 2,
    "perturbations": {"demand_factors": [1.0, 1.05], "lead_offsets": [0], "replications": 1},
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SMALL_SCENARIO))
    return path


def _simulate(scenario_file, output_dir, *extra):
    return run_command(
        ["simulate", "--scenario", str(scenario_file), "-o", str(output_dir), *extra]
    )


def test_usage_errors():
    assert run_command(["frobnicate"]).exit_code == EXIT_USAGE
    result = run_command(["cluster"])
    assert result.exit_code == EXIT_USAGE
    assert "Usage:" in result.summary
    bad_choice = ["forecast", "-d", "x.txt", "-o", "y.csv", "--variant", "magic"]
    assert run_command(bad_choice).exit_code == EXIT_USAGE


def test_help():
    assert run_command(["--help"]).exit_code == EXIT_OK


def test_simulate_is_reproducible(scenario_file, tmp_path):
    first = _simulate(scenario_file, tmp_path / "a", "--seed", "7")
    second = _simulate(scenario_file, tmp_path / "b", "--seed", "7")
    assert first.exit_code == second.exit_code == EXIT_OK
    assert "baseline:" in first.summary and "anfis:" in first.summary
    for a, b in zip(first.report_paths, second.report_paths):
        assert a.read_bytes() == b.read_bytes()


def test_seed_from_the_environment(scenario_file, tmp_path, monkeypatch):
    _simulate(scenario_file, tmp_path / "flag", "--seed", "11")
    monkeypatch.setenv(SEED_ENVVAR, "11")
    from_env = _simulate(scenario_file, tmp_path / "env")
    assert from_env.exit_code == EXIT_OK
    for name in ("metrics.csv", "indicators.csv", "chain.jsonl"):
        assert (tmp_path / "flag" / name).read_bytes() == (tmp_path / "env" / name).read_bytes()


def test_ledger_verify(scenario_file, tmp_path):
    _simulate(scenario_file, tmp_path / "out")
    chain_file = tmp_path / "out" / "chain.jsonl"

    result = run_command(["ledger", "verify", str(chain_file)])
    assert result.exit_code == EXIT_OK
    assert result.summary == "ok"

    # Genesis and five registrations come first, so the first measurement is at height 6.
    text = chain_file.read_text(encoding="utf-8")
    chain_file.write_text(text.replace('"broiler"', '"layer"', 1), encoding="utf-8")
    result = run_command(["ledger", "verify", str(chain_file)])
    assert result.exit_code == EXIT_FAILURE
    assert result.summary == "bad height 6: transactions_root mismatch"


def test_ledger_verify_malformed_file(tmp_path):
    path = tmp_path / "chain.jsonl"
    path.write_text("not json\n")
    result = run_command(["ledger", "verify", str(path)])
    assert result.exit_code == EXIT_FAILURE
    assert "line 1" in result.summary


def test_report_command(scenario_file, tmp_path):
    _simulate(scenario_file, tmp_path / "out")
    metrics = tmp_path / "out" / "metrics.csv"

    printed = run_command(["report", str(metrics)])
    assert printed.exit_code == EXIT_OK
    assert printed.summary.startswith("# Simulation report")

    output = tmp_path / "report.md"
    written = run_command(["report", str(metrics), "-o", str(output)])
    assert written.report_paths == [output]
    assert output.read_text().strip() == printed.summary.strip()


def test_forecast_command(tmp_path):
    demand = tmp_path / "demand.txt"
    demand.write_text("0\n3\n0\n0\n5\n")
    output = tmp_path / "forecast.csv"
    result = run_command(["forecast", "-d", str(demand), "-o", str(output)])
    assert result.exit_code == EXIT_OK
    assert result.summary == "Forecast for period 6: 1.483"

    frame = pd.read_csv(output)
    assert list(frame.columns) == [
        "period",
        "demand",
        "size_estimate",
        "interval_estimate",
        "forecast",
    ]
    assert math.isnan(frame["forecast"][0])
    assert frame["forecast"][1] == pytest.approx(0.95 * 3 / 1.95)
    assert frame["size_estimate"][4] == pytest.approx(3.2)
    assert frame["interval_estimate"][4] == pytest.approx(2.1)


@pytest.mark.parametrize(
    "content, line", [("1\nmany\n", 2), ("1\n0\n-3\n", 3), ("nan\n", 1)]
)
def test_forecast_rejects_bad_lines(tmp_path, content, line):
    demand = tmp_path / "demand.txt"
    demand.write_text(content)
    result = run_command(["forecast", "-d", str(demand), "-o", str(tmp_path / "f.csv")])
    assert result.exit_code == EXIT_FAILURE
    assert f"line {line}" in result.summary


def test_forecast_accepts_the_variant_alias(tmp_path):
    demand = tmp_path / "demand.txt"
    demand.write_text("0\n3\n0\n0\n5\n")
    result = run_command(
        ["forecast", "-d", str(demand), "-o", str(tmp_path / "f.csv"), "--variant", "paper"]
    )
    assert result.exit_code == EXIT_OK
    assert result.summary == "Forecast for period 6: 1.483"


def test_cluster_command(tmp_path):
    result = run_command(["cluster", "-c", "3", "-o", str(tmp_path / "clusters")])
    assert result.exit_code == EXIT_OK

    centers = pd.read_csv(tmp_path / "clusters" / "centers.csv")
    memberships = pd.read_csv(tmp_path / "clusters" / "memberships.csv")
    assert len(centers) == 3
    assert len(memberships) == 9
    totals = memberships[["u_1", "u_2", "u_3"]].sum(axis=1)
    assert totals.tolist() == pytest.approx([1.0] * 9)
    assert set(memberships["label"]) <= {1, 2, 3}


def test_train_command(tmp_path):
    model = tmp_path / "model.json"
    result = run_command(
        ["train", "-c", "2", "--epochs", "3", "--seed", "1", "-o", str(model)]
    )
    assert result.exit_code == EXIT_OK
    assert result.summary.startswith("2 rules")
    assert get_model_rule_count(model) == 2
    # The reference inputs are matched with the packaged outputs, delivery errors included.
    assert load_model(model).output_names == list(DEFAULT_OUTPUTS)


def test_train_writes_membership_curves(tmp_path):
    curves = tmp_path / "curves.csv"
    result = run_command(
        [
            "train",
            "-c",
            "2",
            "--epochs",
            "2",
            "--mf-samples",
            "7",
            "--curves",
            str(curves),
            "-o",
            str(tmp_path / "model.json"),
        ]
    )
    assert result.exit_code == EXIT_OK
    assert result.report_paths[-1] == curves

    frame = pd.read_csv(curves)
    assert list(frame.columns) == ["rule", "input", "x", "grade"]
    assert len(frame) == 2 * len(DEFAULT_INPUTS) * 7
    assert set(frame["input"]) == set(DEFAULT_INPUTS)
    assert frame["grade"].between(0, 1).all()


def test_train_with_explicit_targets(tmp_path):
    inputs = tmp_path / "inputs.csv"
    dump_dataset(load_reference_dataset(), inputs)
    model = tmp_path / "model.json"
    result = run_command(
        ["train", "-d", str(inputs), "-t", "reference", "-c", "2", "--epochs", "2", "-o", str(model)]
    )
    assert result.exit_code == EXIT_OK
    assert "delivery_error_c3" in load_model(model).output_names


def test_train_rejects_missing_outputs(tmp_path):
    inputs = tmp_path / "inputs.csv"
    dump_dataset(load_reference_dataset(), inputs)
    result = run_command(
        [
            "train",
            "-d",
            str(inputs),
            "-c",
            "2",
            "--outputs",
            "delivery_error_c3",
            "-o",
            str(tmp_path / "m.json"),
        ]
    )
    assert result.exit_code == EXIT_FAILURE


@pytest.mark.parametrize("option", ["--inputs", "--outputs"])
def test_train_rejects_unknown_columns(tmp_path, option):
    result = run_command(
        ["train", "-c", "2", option, "bogus", "-o", str(tmp_path / "m.json")]
    )
    assert result.exit_code == EXIT_FAILURE
    assert '"bogus"' in result.summary


def test_cluster_rejects_unknown_columns(tmp_path):
    result = run_command(
        ["cluster", "-c", "2", "--columns", "quality_p1,bogus", "-o", str(tmp_path / "c")]
    )
    assert result.exit_code == EXIT_FAILURE
    assert '"bogus"' in result.summary
