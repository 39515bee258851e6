import math

import numpy as np
import pytest

from chainfis.anfis import LabeledDataset, MembershipKind, build_from_clusters, rmse
from chainfis.anfis_training import (
    TrainingConfig,
    fit_model,
    score_cluster_counts,
    select_cluster_count,
    train_hybrid,
)
from chainfis.fcm import FcmConfig, run_fcm


def _noisy_quadratic(n: int = 30, seed: int = 0) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=n)
    return LabeledDataset(x, x**2 + rng.normal(scale=0.05, size=n))


def _initial_model(data: LabeledDataset, cluster_count: int):
    clusters, memberships, _ = run_fcm(data.inputs, cluster_count, FcmConfig(seed=0))
    return build_from_clusters(clusters, memberships, data)


def test_constant_target_is_fitted_in_one_epoch():
    x = np.linspace(0, 1, 10)
    data = LabeledDataset(x, np.full(10, 3.0))
    model, history = train_hybrid(_initial_model(data, 1), data, data)
    assert history.train_rmse[0] < 1e-9
    assert history.stop_reason == "error_goal"
    assert history.epochs == 1


def test_affine_target_with_one_rule():
    x = np.linspace(-2, 2, 25)
    data = LabeledDataset(x, 2 * x + 1)
    model, history = train_hybrid(_initial_model(data, 1), data, data)
    assert rmse(model, data) < 1e-6


@pytest.mark.parametrize("learning_rate", [0.0, 0.1])
def test_train_rmse_never_increases(learning_rate):
    data = _noisy_quadratic()
    train, test = data.split(1 / 3, seed=0)
    model = _initial_model(train, 3)
    config = TrainingConfig(learning_rate=learning_rate, max_epochs=15, error_goal=0.0)
    trained, history = train_hybrid(model, train, test, config)

    assert history.epochs >= 1
    errors = history.train_rmse
    assert all(later <= earlier + 1e-9 for earlier, later in zip(errors, errors[1:]))
    assert rmse(trained, train) <= rmse(model, train) + 1e-9
    assert len(history.test_rmse) == history.epochs


def test_overfit_guard_stops_training():
    train = _noisy_quadratic(n=12, seed=1)
    test = LabeledDataset(train.inputs, train.targets + 5.0)
    config = TrainingConfig(max_epochs=10, epoch_threshold=0.0, error_goal=0.0)
    _, history = train_hybrid(_initial_model(train, 2), train, test, config)
    assert history.stop_reason == "overfit_guard"
    assert history.epochs == 1


def test_arity_mismatch_is_rejected():
    data = _noisy_quadratic()
    other = LabeledDataset(np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        train_hybrid(_initial_model(data, 2), data, other)


def test_invalid_config():
    with pytest.raises(ValueError):
        TrainingConfig(learning_rate=-0.1)
    with pytest.raises(ValueError):
        TrainingConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainingConfig(test_fraction=1.0)
    with pytest.raises(ValueError):
        TrainingConfig(mf_sample_count=1)


def test_fit_model_with_triangles():
    data = _noisy_quadratic()
    train, test = data.split(1 / 3, seed=0)
    model, history = fit_model(
        train, test, 3, TrainingConfig(max_epochs=5), MembershipKind.TRIANGULAR
    )
    assert model.rule_count == 3
    assert history.epochs >= 1


def test_single_candidate_count():
    assert select_cluster_count(_noisy_quadratic(), 2) == 2


def test_constant_target_prefers_the_smallest_count():
    x = np.linspace(0, 1, 12)
    data = LabeledDataset(x, np.full(12, 2.0))
    assert select_cluster_count(data, 4, TrainingConfig(max_epochs=3)) == 2


def test_scores_cover_the_candidates():
    scores = score_cluster_counts(_noisy_quadratic(), 4, TrainingConfig(max_epochs=3))
    assert sorted(scores) == [2, 3, 4]
    assert all(s >= 0 and not math.isnan(s) for s in scores.values())


def test_cluster_count_bounds():
    with pytest.raises(ValueError):
        select_cluster_count(_noisy_quadratic(), 1)
    with pytest.raises(ValueError):
        select_cluster_count(_noisy_quadratic(n=5), 6)
