import json
import logging
from typing import Any, Dict, List, Optional, Sequence

import attr
import numpy as np
import pandas as pd
from rxn.utilities.files import PathLike

from .anfis import (
    FeatureScaler,
    FuzzyInferenceModel,
    FuzzyRule,
    MembershipFunction,
    MembershipKind,
    predict,
    sample_membership_curves,
)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MODEL_FORMAT = "chainfis-anfis"
MODEL_FORMAT_VERSION = 1


def format_real(value: float) -> str:
    """Decimal with 17 significant digits; parses back to the same float."""
    return format(float(value), ".17g")


def _reals(values: Sequence[float]) -> List[str]:
    return [format_real(v) for v in values]


def _parse_reals(values: Sequence[str]) -> List[float]:
    return [float(v) for v in values]


@attr.s(auto_attribs=True, frozen=True, eq=False)
class ModelBundle:
    """
    Trained model with the metadata needed to apply it to raw indicator rows.
    """

    model: FuzzyInferenceModel
    input_names: List[str] = attr.Factory(list)
    output_names: List[str] = attr.Factory(list)
    scaler: Optional[FeatureScaler] = None

    def predict_raw(self, rows: np.ndarray) -> np.ndarray:
        """Outputs for unscaled input rows."""
        inputs = self.scaler.transform(rows) if self.scaler is not None else rows
        return predict(self.model, inputs)


def bundle_to_dict(bundle: ModelBundle) -> Dict[str, Any]:
    rules = []
    for rule in bundle.model.rules:
        rules.append(
            {
                "antecedent": [
                    {"kind": mf.kind.value, "parameters": _reals(mf.parameters)}
                    for mf in rule.antecedent
                ],
                "consequent": [_reals(row) for row in rule.consequent],
            }
        )
    scaler = None
    if bundle.scaler is not None:
        scaler = {
            "minimum": _reals(bundle.scaler.minimum),
            "maximum": _reals(bundle.scaler.maximum),
        }
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "input_dim": bundle.model.input_dim,
        "output_dim": bundle.model.output_dim,
        "input_names": list(bundle.input_names),
        "output_names": list(bundle.output_names),
        "scaler": scaler,
        "rules": rules,
    }


def bundle_from_dict(content: Dict[str, Any]) -> ModelBundle:
    if content.get("format") != MODEL_FORMAT:
        raise ValueError(f'Not a {MODEL_FORMAT} model file (format={content.get("format")}).')
    if content.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f'Unsupported model file version {content.get("version")}.')
    try:
        rules = [
            FuzzyRule(
                antecedent=[
                    MembershipFunction(
                        MembershipKind(mf["kind"]), _parse_reals(mf["parameters"])
                    )
                    for mf in rule["antecedent"]
                ],
                consequent=[_parse_reals(row) for row in rule["consequent"]],
            )
            for rule in content["rules"]
        ]
        scaler = None
        if content.get("scaler") is not None:
            scaler = FeatureScaler(
                _parse_reals(content["scaler"]["minimum"]),
                _parse_reals(content["scaler"]["maximum"]),
            )
    except (KeyError, TypeError) as e:
        raise ValueError(f"Malformed model file: {e}") from e

    model = FuzzyInferenceModel(rules)
    if (model.input_dim, model.output_dim) != (content["input_dim"], content["output_dim"]):
        raise ValueError("Model file arity does not match its rules.")
    return ModelBundle(
        model=model,
        input_names=list(content.get("input_names", [])),
        output_names=list(content.get("output_names", [])),
        scaler=scaler,
    )


def save_model(bundle: ModelBundle, path: PathLike) -> None:
    """
    Save a model as a self-describing JSON document.

    Args:
        bundle: model and metadata.
        path: where to write the file.
    """
    with open(path, "wt") as f:
        json.dump(bundle_to_dict(bundle), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f'Saved model with {bundle.model.rule_count} rules to "{path}".')


def load_model(path: PathLike) -> ModelBundle:
    """
    Load a model saved with save_model.

    Args:
        path: model file, such as ``model.json``.
    """
    with open(path, "rt") as f:
        try:
            content = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f'"{path}" is not valid JSON: {e}') from e
    return bundle_from_dict(content)


def membership_curves_frame(bundle: ModelBundle, sample_count: int) -> pd.DataFrame:
    """
    Sampled antecedent curves of a model, one row per point.

    The x values are on the scaled input axis the model was trained on.
    """
    names = bundle.input_names or [
        f"x{i}" for i in range(1, bundle.model.input_dim + 1)
    ]
    rows = []
    curves = sample_membership_curves(bundle.model, sample_count)
    for rule_index, per_input in enumerate(curves, start=1):
        for name, (xs, grades) in zip(names, per_input):
            for x, grade in zip(xs, grades):
                rows.append((rule_index, name, float(x), float(grade)))
    return pd.DataFrame(rows, columns=["rule", "input", "x", "grade"])


def write_membership_curves(bundle: ModelBundle, path: PathLike, sample_count: int) -> None:
    """Write the sampled antecedent curves as CSV, 17 significant digits."""
    frame = membership_curves_frame(bundle, sample_count)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f'Wrote {len(frame)} membership curve points to "{path}".')


def get_model_rule_count(path: PathLike) -> int:
    """
    Get the number of rules of a saved model.

    Args:
        path: model file, such as ``model.json``.
    """
    return load_model(path).model.rule_count


def get_model_input_names(path: PathLike) -> List[str]:
    """
    Get the names of the inputs a saved model was trained on.

    Args:
        path: model file, such as ``model.json``.
    """
    return load_model(path).input_names
