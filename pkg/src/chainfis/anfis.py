"""
First-order Takagi-Sugeno fuzzy inference seeded by fuzzy C-means.

The layers follow the usual ANFIS structure: per-input membership grades,
rule firing strengths (product t-norm), normalization, affine rule
consequents and the weighted sum.
"""

import logging
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import attr
import numpy as np
import torch

from .fcm import ClusterSet, DegenerateClusterError, MembershipMatrix, as_data_matrix
from .torch_utils import as_tensor, to_numpy

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MAX_INPUT_DIM = 9
MIN_SPREAD = 1e-3
# Below this total firing strength, the output is the plain mean of the rule outputs.
MIN_TOTAL_FIRING = 1e-12
RIDGE_LAMBDA = 1e-8


class MembershipKind(Enum):
    GAUSSIAN = "gaussian"
    TRIANGULAR = "triangular"


@attr.s(auto_attribs=True, frozen=True)
class MembershipFunction:
    """
    Membership function of one input in a rule antecedent.

    Gaussian functions have the parameters (center, spread), triangular ones
    (left, peak, right).
    """

    kind: MembershipKind
    parameters: Tuple[float, ...] = attr.ib(converter=lambda p: tuple(float(v) for v in p))

    def __attrs_post_init__(self) -> None:
        if self.kind is MembershipKind.GAUSSIAN:
            if len(self.parameters) != 2:
                raise ValueError("A Gaussian needs (center, spread).")
            if not self.parameters[1] > 0:
                raise ValueError(f"Spread must be > 0, got {self.parameters[1]}.")
        else:
            if len(self.parameters) != 3:
                raise ValueError("A triangle needs (left, peak, right).")
            left, peak, right = self.parameters
            if not left <= peak <= right:
                raise ValueError(f"Expected left <= peak <= right, got {self.parameters}.")

    @classmethod
    def gaussian(cls, center: float, spread: float) -> "MembershipFunction":
        return cls(MembershipKind.GAUSSIAN, (center, spread))

    @classmethod
    def triangular(cls, left: float, peak: float, right: float) -> "MembershipFunction":
        return cls(MembershipKind.TRIANGULAR, (left, peak, right))

    @property
    def support(self) -> Tuple[float, float]:
        """Interval outside of which the grade is (practically) zero."""
        if self.kind is MembershipKind.GAUSSIAN:
            center, spread = self.parameters
            return center - 3 * spread, center + 3 * spread
        return self.parameters[0], self.parameters[2]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Membership grades in [0, 1] for the given input values."""
        values = as_tensor(np.atleast_1d(x))
        with torch.no_grad():
            if self.kind is MembershipKind.GAUSSIAN:
                grades = _gaussian(values, *self.parameters)
            else:
                grades = _triangular(values, *self.parameters)
        return to_numpy(grades)


def _as_consequent(value) -> np.ndarray:
    return np.array(value, dtype=float, ndmin=2)


@attr.s(auto_attribs=True, frozen=True, eq=False)
class FuzzyRule:
    """
    Rule with one membership function per input and affine consequents.

    The consequent has one row per output; each row holds one coefficient
    per input followed by the bias.
    """

    antecedent: Tuple[MembershipFunction, ...] = attr.ib(converter=tuple)
    consequent: np.ndarray = attr.ib(converter=_as_consequent)

    def __attrs_post_init__(self) -> None:
        if self.consequent.shape[1] != len(self.antecedent) + 1:
            raise ValueError(
                f"Consequent rows need {len(self.antecedent) + 1} coefficients, "
                f"got {self.consequent.shape[1]}."
            )


@attr.s(auto_attribs=True, frozen=True, eq=False)
class FuzzyInferenceModel:
    """
    Takagi-Sugeno model; multiple outputs share the rule antecedents.
    """

    rules: Tuple[FuzzyRule, ...] = attr.ib(converter=tuple)

    def __attrs_post_init__(self) -> None:
        if not self.rules:
            raise ValueError("A fuzzy inference model needs at least one rule.")
        arities = {len(rule.antecedent) for rule in self.rules}
        outputs = {rule.consequent.shape[0] for rule in self.rules}
        if len(arities) != 1 or len(outputs) != 1:
            raise ValueError("All rules must have the same input and output arity.")
        if self.input_dim > MAX_INPUT_DIM:
            raise ValueError(
                f"At most {MAX_INPUT_DIM} inputs are supported, got {self.input_dim}."
            )

    @property
    def input_dim(self) -> int:
        return len(self.rules[0].antecedent)

    @property
    def output_dim(self) -> int:
        return int(self.rules[0].consequent.shape[0])

    @property
    def rule_count(self) -> int:
        return len(self.rules)

    def consequent_tensor(self) -> np.ndarray:
        """Consequents of all rules, shape (rules, outputs, inputs + 1)."""
        return np.stack([rule.consequent for rule in self.rules])

    def with_consequents(self, consequents: np.ndarray) -> "FuzzyInferenceModel":
        rules = [
            attr.evolve(rule, consequent=consequents[r])
            for r, rule in enumerate(self.rules)
        ]
        return FuzzyInferenceModel(rules)


@attr.s(auto_attribs=True, frozen=True, eq=False)
class LabeledDataset:
    """Inputs of shape (n, d) with targets of shape (n, q)."""

    inputs: np.ndarray = attr.ib(converter=as_data_matrix)
    targets: np.ndarray = attr.ib(converter=as_data_matrix)

    def __attrs_post_init__(self) -> None:
        if len(self.inputs) == 0:
            raise ValueError("A dataset needs at least one sample.")
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"{len(self.inputs)} input rows for {len(self.targets)} target rows."
            )

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.targets.shape[1])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(self.inputs[idx], self.targets[idx])

    def split(
        self, test_fraction: float, seed: int
    ) -> Tuple["LabeledDataset", "LabeledDataset"]:
        """
        Seeded train/test split; both parts keep at least one sample.
        """
        n = len(self)
        if n < 2:
            raise ValueError("Splitting needs at least two samples.")
        order = np.random.default_rng(seed).permutation(n)
        n_test = min(n - 1, max(1, int(round(n * test_fraction))))
        return self.subset(np.sort(order[n_test:])), self.subset(np.sort(order[:n_test]))


@attr.s(auto_attribs=True, frozen=True, eq=False)
class FeatureScaler:
    """Per-column min-max scaling to [0, 1]; constant columns map to 0."""

    minimum: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))
    maximum: np.ndarray = attr.ib(converter=lambda v: np.asarray(v, dtype=float))

    @classmethod
    def fit(cls, values: np.ndarray) -> "FeatureScaler":
        matrix = as_data_matrix(values)
        return cls(matrix.min(axis=0), matrix.max(axis=0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        matrix = as_data_matrix(values)
        span = self.maximum - self.minimum
        safe_span = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (matrix - self.minimum) / safe_span, 0.0)


def _gaussian(x: torch.Tensor, center, spread) -> torch.Tensor:
    return torch.exp(-0.5 * ((x - center) / spread) ** 2)


def _triangular(x: torch.Tensor, left: float, peak: float, right: float) -> torch.Tensor:
    if peak > left:
        rising = (x - left) / (peak - left)
    else:
        rising = (x >= left).to(x.dtype)
    if right > peak:
        falling = (right - x) / (right - peak)
    else:
        falling = (x <= right).to(x.dtype)
    return torch.clamp(torch.minimum(rising, falling), 0.0, 1.0)


@attr.s(auto_attribs=True)
class PremiseParameters:
    """
    Antecedent parameters as arrays of shape (rules, inputs).

    Entries of triangular functions are carried in ``triangles`` and are
    never differentiated.
    """

    centers: np.ndarray
    spreads: np.ndarray
    is_gaussian: np.ndarray
    triangles: np.ndarray

    @classmethod
    def from_model(cls, model: FuzzyInferenceModel) -> "PremiseParameters":
        shape = (model.rule_count, model.input_dim)
        centers = np.zeros(shape)
        spreads = np.ones(shape)
        is_gaussian = np.zeros(shape, dtype=bool)
        triangles = np.zeros(shape + (3,))
        for r, rule in enumerate(model.rules):
            for j, mf in enumerate(rule.antecedent):
                if mf.kind is MembershipKind.GAUSSIAN:
                    is_gaussian[r, j] = True
                    centers[r, j], spreads[r, j] = mf.parameters
                else:
                    triangles[r, j] = mf.parameters
                    centers[r, j] = mf.parameters[1]
        return cls(centers, spreads, is_gaussian, triangles)

    def to_model(self, consequents: np.ndarray) -> FuzzyInferenceModel:
        rules = []
        for r in range(self.centers.shape[0]):
            antecedent = []
            for j in range(self.centers.shape[1]):
                if self.is_gaussian[r, j]:
                    antecedent.append(
                        MembershipFunction.gaussian(self.centers[r, j], self.spreads[r, j])
                    )
                else:
                    antecedent.append(MembershipFunction.triangular(*self.triangles[r, j]))
            rules.append(FuzzyRule(antecedent, consequents[r]))
        return FuzzyInferenceModel(rules)


def _membership_grades(
    x: torch.Tensor,
    premises: PremiseParameters,
    centers: torch.Tensor,
    spreads: torch.Tensor,
) -> torch.Tensor:
    """Grades of shape (n, rules, inputs)."""
    grades = _gaussian(x[:, None, :], centers[None, :, :], spreads[None, :, :])
    if not premises.is_gaussian.all():
        columns = []
        for r in range(premises.centers.shape[0]):
            row = []
            for j in range(premises.centers.shape[1]):
                if premises.is_gaussian[r, j]:
                    row.append(grades[:, r, j])
                else:
                    row.append(_triangular(x[:, j], *premises.triangles[r, j]))
            columns.append(torch.stack(row, dim=1))
        grades = torch.stack(columns, dim=1)
    return grades


def normalized_firing(
    x: torch.Tensor,
    premises: PremiseParameters,
    centers: Optional[torch.Tensor] = None,
    spreads: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Normalized firing strengths of shape (n, rules); rows sum to one.
    """
    if centers is None:
        centers = as_tensor(premises.centers)
    if spreads is None:
        spreads = as_tensor(premises.spreads)
    strengths = _membership_grades(x, premises, centers, spreads).prod(dim=2)
    total = strengths.sum(dim=1, keepdim=True)
    fallback = torch.full_like(strengths, 1.0 / strengths.shape[1])
    weighted = strengths / torch.clamp(total, min=MIN_TOTAL_FIRING)
    return torch.where(total >= MIN_TOTAL_FIRING, weighted, fallback)


def _with_bias(x: torch.Tensor) -> torch.Tensor:
    return torch.cat([x, torch.ones(x.shape[0], 1, dtype=x.dtype)], dim=1)


def forward(
    x: torch.Tensor,
    premises: PremiseParameters,
    consequents: torch.Tensor,
    centers: Optional[torch.Tensor] = None,
    spreads: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Model outputs of shape (n, outputs).

    Args:
        x: inputs, shape (n, inputs).
        premises: antecedent parameters.
        consequents: shape (rules, outputs, inputs + 1).
        centers: optional tensor overriding the Gaussian centers (for autograd).
        spreads: optional tensor overriding the Gaussian spreads (for autograd).
    """
    weights = normalized_firing(x, premises, centers, spreads)
    rule_outputs = torch.einsum("nk,rqk->nrq", _with_bias(x), consequents)
    return torch.einsum("nr,nrq->nq", weights, rule_outputs)


def _check_arity(model: FuzzyInferenceModel, inputs: np.ndarray) -> np.ndarray:
    matrix = np.asarray(inputs, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.shape[1] != model.input_dim:
        raise ValueError(
            f"Model expects {model.input_dim} inputs, got {matrix.shape[1]}."
        )
    return matrix


def predict(model: FuzzyInferenceModel, inputs: np.ndarray) -> np.ndarray:
    """Outputs for a batch of inputs, shape (n, outputs)."""
    matrix = _check_arity(model, inputs)
    premises = PremiseParameters.from_model(model)
    with torch.no_grad():
        outputs = forward(
            as_tensor(matrix), premises, as_tensor(model.consequent_tensor())
        )
    return to_numpy(outputs)


def evaluate(model: FuzzyInferenceModel, inputs: Sequence[float]) -> np.ndarray:
    """
    Defuzzified output vector for one input vector.

    Args:
        model: fuzzy inference model.
        inputs: one value per model input.
    """
    vector = np.asarray(inputs, dtype=float)
    if vector.ndim != 1:
        raise ValueError("evaluate() takes a single input vector; use predict().")
    return predict(model, vector)[0]


def rmse(model: FuzzyInferenceModel, data: LabeledDataset) -> float:
    """Root mean squared error over all samples and outputs."""
    residual = predict(model, data.inputs) - data.targets
    return float(np.sqrt(np.mean(residual**2)))


def premise_gradient(
    model: FuzzyInferenceModel, data: LabeledDataset
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradient of the RMSE with respect to the Gaussian centers and spreads.

    Consequents are held fixed. Entries of triangular functions get a zero
    gradient.

    Returns:
        Tuple with the gradients for centers and spreads, shape (rules, inputs).
    """
    premises = PremiseParameters.from_model(model)
    mask = premises.is_gaussian
    if not mask.any():
        return np.zeros(mask.shape), np.zeros(mask.shape)
    centers = as_tensor(premises.centers, requires_grad=True)
    spreads = as_tensor(premises.spreads, requires_grad=True)
    outputs = forward(
        as_tensor(_check_arity(model, data.inputs)),
        premises,
        as_tensor(model.consequent_tensor()),
        centers,
        spreads,
    )
    error = torch.sqrt(torch.mean((outputs - as_tensor(data.targets)) ** 2))
    error.backward()
    assert centers.grad is not None and spreads.grad is not None
    return (
        np.where(mask, to_numpy(centers.grad), 0.0),
        np.where(mask, to_numpy(spreads.grad), 0.0),
    )


def solve_consequents(
    premises: PremiseParameters, data: LabeledDataset
) -> Tuple[np.ndarray, bool]:
    """
    Least-squares consequents for frozen premises.

    A rank-deficient system is solved with a small ridge term instead.

    Returns:
        Tuple with the consequents, shape (rules, outputs, inputs + 1), and
        whether the ridge fallback was used.
    """
    x = as_tensor(data.inputs)
    with torch.no_grad():
        weights = to_numpy(normalized_firing(x, premises))
    x1 = np.hstack([data.inputs, np.ones((len(data), 1))])
    rules, width = weights.shape[1], x1.shape[1]
    design = (weights[:, :, None] * x1[:, None, :]).reshape(len(data), rules * width)

    solution, _, rank, _ = np.linalg.lstsq(design, data.targets, rcond=None)
    singular = rank < design.shape[1]
    if singular:
        gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
        solution = np.linalg.solve(gram, design.T @ data.targets)

    # (rules * width, outputs) -> (rules, outputs, width)
    consequents = solution.reshape(rules, width, -1).transpose(0, 2, 1)
    return consequents, bool(singular)


def build_from_clusters(
    clusters: ClusterSet,
    memberships: MembershipMatrix,
    data: LabeledDataset,
    mf_kind: MembershipKind = MembershipKind.GAUSSIAN,
) -> FuzzyInferenceModel:
    """
    One rule per cluster, with antecedents centered on the cluster centers.

    Spreads are the membership-weighted standard deviations per input,
    floored at MIN_SPREAD; consequents come from a global least-squares fit.

    Args:
        clusters: FCM result on the dataset inputs.
        memberships: the matching membership matrix.
        data: labeled dataset whose inputs were clustered.
        mf_kind: antecedent function family.
    """
    if clusters.dimension != data.input_dim:
        raise ValueError(
            f"Clusters have {clusters.dimension} coordinates, data has {data.input_dim}."
        )
    if memberships.point_count != len(data):
        raise ValueError("Membership matrix does not match the dataset size.")

    weights = memberships.values**clusters.fuzzifier
    mass = weights.sum(axis=1)
    if np.any(mass <= 0):
        raise DegenerateClusterError("A cluster has zero membership mass.")

    deviations = (data.inputs[None, :, :] - clusters.centers[:, None, :]) ** 2
    variance = np.einsum("rn,rnd->rd", weights, deviations) / mass[:, None]
    spreads = np.maximum(np.sqrt(variance), MIN_SPREAD)

    shape = clusters.centers.shape
    is_gaussian = np.full(shape, mf_kind is MembershipKind.GAUSSIAN)
    triangles = np.stack(
        [clusters.centers - 2 * spreads, clusters.centers, clusters.centers + 2 * spreads],
        axis=2,
    )
    premises = PremiseParameters(clusters.centers.copy(), spreads, is_gaussian, triangles)

    consequents, singular = solve_consequents(premises, data)
    if singular:
        logger.warning(
            "Initial consequent system is rank deficient; ridge regularization was used."
        )
    model = premises.to_model(consequents)
    logger.info(f"Built fuzzy model with {model.rule_count} rules.")
    return model


def sample_membership_curves(
    model: FuzzyInferenceModel, sample_count: int = 20
) -> List[List[Tuple[np.ndarray, np.ndarray]]]:
    """
    Evaluate every antecedent function on evenly spaced points of its support.

    Returns:
        Per rule, per input: (x values, grades), each of length sample_count.
    """
    if sample_count < 2:
        raise ValueError("At least two samples are needed per curve.")
    curves = []
    for rule in model.rules:
        per_input = []
        for mf in rule.antecedent:
            low, high = mf.support
            xs = np.linspace(low, high, sample_count)
            per_input.append((xs, mf.evaluate(xs)))
        curves.append(per_input)
    return curves
