import json

import attr
import pytest

from chainfis.forecast import SbaVariant
from chainfis.scenario import (
    Scenario,
    ScenarioError,
    load_scenario,
    reference_scenario,
    resolve_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def test_reference_scenario_uses_the_defaults():
    scenario = reference_scenario()
    defaults = Scenario()
    assert scenario.demand.size_log_mean == pytest.approx(defaults.demand.size_log_mean)
    assert attr.evolve(scenario, demand=defaults.demand) == defaults
    assert scenario.horizon_days == 30
    assert scenario.policy.baseline_review_days == 5
    assert scenario.policy.baseline_quantity == 6
    assert scenario.policy.sba_variant is SbaVariant.SHIFTED
    assert scenario.ledger.signers == ("retailer", "distributor", "auditor")
    assert resolve_scenario("reference") == scenario


def test_dict_round_trip():
    scenario = Scenario(seed=7, horizon_days=12)
    content = scenario_to_dict(scenario)
    assert content["economics"]["bounds"]["q"] == [1.0, 20.0]
    assert scenario_from_dict(json.loads(json.dumps(content))) == scenario


@pytest.mark.parametrize(
    "value, expected",
    [
        ("paper", SbaVariant.SHIFTED),
        ("shifted", SbaVariant.SHIFTED),
        ("textbook", SbaVariant.TEXTBOOK),
    ],
)
def test_sba_variant_spellings(value, expected):
    scenario = scenario_from_dict({"policy": {"sba_variant": value}})
    assert scenario.policy.sba_variant is expected
    assert scenario_to_dict(scenario)["policy"]["sba_variant"] == expected.value


def test_partial_file_takes_defaults(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"seed": 3, "ledger": {"k": 1}, "economics": {"beta": 4.0}}))
    scenario = load_scenario(path)
    assert scenario.seed == 3
    assert scenario.ledger.k == 1 and scenario.ledger.n == 3
    assert scenario.economics.params.beta == 4.0
    assert scenario.economics.bounds.p == (1.0, 5.0)
    assert scenario.with_seed(9).seed == 9


@pytest.mark.parametrize(
    "content",
    [
        {"horizon": 30},
        {"demand": {"rate": 0.3}},
        {"horizon_days": 0},
        {"demand": {"occurrence_probability": 1.5}},
        {"ledger": {"k": 4, "n": 3}},
        {"ledger": {"n": 6}},
        {"policy": {"sba_variant": "magic"}},
        {"economics": {"beta": 0.0}},
        {"economics": {"bounds": [1, 2]}},
        {"perturbations": {"lead_offsets": [-2]}},
        {"logistics": {"unit_price": 2.0}},
        {"demand": 3},
    ],
)
def test_invalid_content(content):
    with pytest.raises(ScenarioError):
        scenario_from_dict(content)


def test_invalid_files(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ScenarioError):
        load_scenario(broken)

    listed = tmp_path / "list.json"
    listed.write_text("[]")
    with pytest.raises(ScenarioError):
        load_scenario(listed)
