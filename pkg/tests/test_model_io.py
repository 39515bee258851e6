import json

import numpy as np
import pytest

from chainfis.anfis import FeatureScaler, LabeledDataset, build_from_clusters, predict
from chainfis.fcm import FcmConfig, run_fcm
from chainfis.model_io import (
    MODEL_FORMAT,
    ModelBundle,
    bundle_from_dict,
    bundle_to_dict,
    format_real,
    get_model_input_names,
    get_model_rule_count,
    load_model,
    membership_curves_frame,
    save_model,
    write_membership_curves,
)


@pytest.fixture
def bundle() -> ModelBundle:
    rng = np.random.default_rng(0)
    raw = rng.uniform(0, 50, size=(20, 2))
    scaler = FeatureScaler.fit(raw)
    data = LabeledDataset(scaler.transform(raw), np.stack([raw.sum(axis=1), raw[:, 0]], axis=1))
    clusters, memberships, _ = run_fcm(data.inputs, 3, FcmConfig(seed=1))
    model = build_from_clusters(clusters, memberships, data)
    return ModelBundle(model, ["quality_p1", "material_p2"], ["y1", "y2"], scaler)


def test_format_real_is_exact():
    value = 0.1 + 0.2
    assert float(format_real(value)) == value


def test_saved_model_predicts_identically(bundle, tmp_path):
    path = tmp_path / "model.json"
    save_model(bundle, path)
    loaded = load_model(path)

    rows = np.array([[10.0, 20.0], [45.0, 3.0]])
    np.testing.assert_array_equal(loaded.predict_raw(rows), bundle.predict_raw(rows))
    assert loaded.input_names == bundle.input_names
    assert loaded.output_names == ["y1", "y2"]
    assert get_model_rule_count(path) == 3
    assert get_model_input_names(path) == ["quality_p1", "material_p2"]


def test_saving_is_deterministic(bundle, tmp_path):
    save_model(bundle, tmp_path / "a.json")
    save_model(load_model(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_predict_raw_applies_the_scaler(bundle):
    rows = np.array([[10.0, 20.0]])
    expected = predict(bundle.model, bundle.scaler.transform(rows))
    np.testing.assert_array_equal(bundle.predict_raw(rows), expected)


def test_rejects_foreign_files(bundle, tmp_path):
    content = bundle_to_dict(bundle)
    assert content["format"] == MODEL_FORMAT

    with pytest.raises(ValueError):
        bundle_from_dict(dict(content, format="other"))
    with pytest.raises(ValueError):
        bundle_from_dict(dict(content, version=99))
    with pytest.raises(ValueError):
        bundle_from_dict(dict(content, input_dim=5))
    with pytest.raises(ValueError):
        bundle_from_dict({k: v for k, v in content.items() if k != "rules"})

    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_model(path)


def test_model_file_is_json(bundle, tmp_path):
    path = tmp_path / "model.json"
    save_model(bundle, path)
    content = json.loads(path.read_text())
    assert content["input_dim"] == 2
    assert content["output_dim"] == 2
    assert len(content["rules"]) == 3


def test_membership_curves(bundle, tmp_path):
    frame = membership_curves_frame(bundle, 5)
    assert list(frame.columns) == ["rule", "input", "x", "grade"]
    assert len(frame) == bundle.model.rule_count * 2 * 5
    assert set(frame["input"]) == {"quality_p1", "material_p2"}
    assert frame["rule"].min() == 1

    path = tmp_path / "curves.csv"
    write_membership_curves(bundle, path, 5)
    assert path.read_text().splitlines()[0] == "rule,input,x,grade"
