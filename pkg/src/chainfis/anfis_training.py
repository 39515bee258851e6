import logging
import math
from typing import Dict, List, Tuple

import attr
import numpy as np

from .anfis import (
    MIN_SPREAD,
    FuzzyInferenceModel,
    MembershipKind,
    LabeledDataset,
    PremiseParameters,
    build_from_clusters,
    premise_gradient,
    rmse,
    solve_consequents,
)
from .fcm import DegenerateClusterError, FcmConfig, run_fcm

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Step halvings tried before a premise update is given up for the epoch.
MAX_STEP_HALVINGS = 30
# Held-out errors closer than this count as a tie in the cluster-count search.
SCORE_TIE_TOLERANCE = 1e-9


@attr.s(auto_attribs=True, frozen=True)
class TrainingConfig:
    """
    Hybrid training parameters.

    Attributes:
        learning_rate: premise gradient step; 0 trains the consequents only.
        error_goal: train RMSE at which training stops.
        train_test_threshold: ratio test RMSE / train RMSE above which the
            overfit guard stops training.
        epoch_threshold: fraction of max_epochs before the overfit guard may fire.
        max_epochs: upper bound on the number of epochs.
        seed: seed for clustering and data splits.
        test_fraction: held-out share when searching the cluster count.
        mf_sample_count: points per curve when exporting membership curves.
    """

    learning_rate: float = 0.1
    error_goal: float = 0.001
    train_test_threshold: float = 1.3
    epoch_threshold: float = 0.6
    max_epochs: int = 50
    seed: int = 0
    test_fraction: float = 1.0 / 3.0
    mf_sample_count: int = 20

    def __attrs_post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}.")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}.")
        if not 0 < self.test_fraction < 1:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}.")
        if self.mf_sample_count < 2:
            raise ValueError(f"mf_sample_count must be >= 2, got {self.mf_sample_count}.")


@attr.s(auto_attribs=True)
class TrainingHistory:
    train_rmse: List[float] = attr.Factory(list)
    test_rmse: List[float] = attr.Factory(list)
    stop_reason: str = "max_epochs"
    warnings: List[str] = attr.Factory(list)

    @property
    def epochs(self) -> int:
        return len(self.train_rmse)


def _fit_consequents(
    model: FuzzyInferenceModel, train: LabeledDataset, history: TrainingHistory
) -> FuzzyInferenceModel:
    premises = PremiseParameters.from_model(model)
    consequents, singular = solve_consequents(premises, train)
    if singular:
        message = (
            f"Epoch {history.epochs + 1}: singular least-squares system, "
            "ridge regularization used."
        )
        logger.warning(message)
        history.warnings.append(message)
    candidate = model.with_consequents(consequents)
    # The ridge solution is not guaranteed to beat the incumbent consequents.
    if rmse(candidate, train) > rmse(model, train):
        return model
    return candidate


def _premise_step(
    model: FuzzyInferenceModel,
    train: LabeledDataset,
    learning_rate: float,
    history: TrainingHistory,
) -> FuzzyInferenceModel:
    premises = PremiseParameters.from_model(model)
    if learning_rate == 0 or not premises.is_gaussian.any():
        return model

    current = rmse(model, train)
    if current == 0.0:
        return model
    grad_centers, grad_spreads = premise_gradient(model, train)
    if not (np.all(np.isfinite(grad_centers)) and np.all(np.isfinite(grad_spreads))):
        message = f"Epoch {history.epochs + 1}: non-finite premise gradient, step skipped."
        logger.warning(message)
        history.warnings.append(message)
        return model
    consequents = model.consequent_tensor()
    step = learning_rate
    for _ in range(MAX_STEP_HALVINGS + 1):
        candidate = attr.evolve(
            premises,
            centers=premises.centers - step * grad_centers,
            spreads=np.maximum(premises.spreads - step * grad_spreads, MIN_SPREAD),
        ).to_model(consequents)
        if rmse(candidate, train) <= current:
            return candidate
        step /= 2

    message = f"Epoch {history.epochs + 1}: premise step rejected, no descent found."
    logger.warning(message)
    history.warnings.append(message)
    return model


def train_hybrid(
    model: FuzzyInferenceModel,
    train: LabeledDataset,
    test: LabeledDataset,
    config: TrainingConfig = TrainingConfig(),
) -> Tuple[FuzzyInferenceModel, TrainingHistory]:
    """
    Train a fuzzy inference model with the two-pass hybrid rule.

    Each epoch solves the consequents by least squares with frozen premises,
    then takes one gradient step on the Gaussian premise parameters against
    the train RMSE. Neither pass increases the train RMSE.

    Args:
        model: initial model, typically from build_from_clusters.
        train: training data.
        test: data for the overfit guard.
        config: training parameters.

    Returns:
        Tuple with the trained model and the per-epoch history.
    """
    for name, data in (("train", train), ("test", test)):
        if data.input_dim != model.input_dim or data.output_dim != model.output_dim:
            raise ValueError(
                f"The {name} data has arity {data.input_dim}->{data.output_dim}, "
                f"the model {model.input_dim}->{model.output_dim}."
            )

    history = TrainingHistory()
    for epoch in range(1, config.max_epochs + 1):
        model = _fit_consequents(model, train, history)
        model = _premise_step(model, train, config.learning_rate, history)

        train_error = rmse(model, train)
        test_error = rmse(model, test)
        history.train_rmse.append(train_error)
        history.test_rmse.append(test_error)
        logger.debug(f"Epoch {epoch}: train RMSE {train_error}, test RMSE {test_error}")

        if train_error <= config.error_goal:
            history.stop_reason = "error_goal"
            break
        guard_active = epoch >= config.epoch_threshold * config.max_epochs
        if guard_active and test_error > config.train_test_threshold * train_error:
            history.stop_reason = "overfit_guard"
            break

    logger.info(
        f"Training stopped after {history.epochs} epoch(s) ({history.stop_reason}); "
        f"train RMSE {history.train_rmse[-1]:.4g}."
    )
    return model, history


def fit_model(
    train: LabeledDataset,
    test: LabeledDataset,
    cluster_count: int,
    config: TrainingConfig = TrainingConfig(),
    mf_kind: MembershipKind = MembershipKind.GAUSSIAN,
) -> Tuple[FuzzyInferenceModel, TrainingHistory]:
    """Cluster the training inputs, build the rules and train them."""
    clusters, memberships, _ = run_fcm(
        train.inputs, cluster_count, FcmConfig(seed=config.seed)
    )
    model = build_from_clusters(clusters, memberships, train, mf_kind)
    return train_hybrid(model, train, test, config)


def score_cluster_counts(
    data: LabeledDataset, c_max: int, config: TrainingConfig = TrainingConfig()
) -> Dict[int, float]:
    """
    Held-out RMSE of build + train for every cluster count in [2, c_max].

    Counts that cannot be fitted on the training split score infinity.
    """
    if c_max < 2:
        raise ValueError(f"c_max must be >= 2, got {c_max}.")
    if c_max > len(data):
        raise ValueError(f"c_max={c_max} exceeds the dataset size {len(data)}.")

    train, held_out = data.split(config.test_fraction, config.seed)
    scores: Dict[int, float] = {}
    for count in range(2, c_max + 1):
        if count > len(train):
            logger.warning(f"Skipping {count} clusters: only {len(train)} training samples.")
            scores[count] = math.inf
            continue
        try:
            model, _ = fit_model(train, held_out, count, config)
        except DegenerateClusterError as e:
            logger.warning(f"Skipping {count} clusters: {e}")
            scores[count] = math.inf
            continue
        scores[count] = rmse(model, held_out)
        logger.info(f"{count} clusters: held-out RMSE {scores[count]:.4g}")
    return scores


def select_cluster_count(
    data: LabeledDataset, c_max: int, config: TrainingConfig = TrainingConfig()
) -> int:
    """
    Exhaustive search of the cluster count minimizing the held-out RMSE.

    Ties (within SCORE_TIE_TOLERANCE) go to the smallest count.
    """
    scores = score_cluster_counts(data, c_max, config)
    best_count, best_score = 2, scores[2]
    for count in sorted(scores):
        if scores[count] < best_score - SCORE_TIE_TOLERANCE:
            best_count, best_score = count, scores[count]
    if math.isinf(best_score):
        raise ValueError("No cluster count could be fitted on this dataset.")
    return best_count
