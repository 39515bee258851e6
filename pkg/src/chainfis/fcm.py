import logging
from typing import List, Tuple

import attr
import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Distances below this are treated as a point sitting on a center.
_COINCIDENCE_DISTANCE = 1e-12


class DegenerateClusterError(ValueError):
    """Raised when a cluster carries no membership mass at all."""


def as_data_matrix(data: np.ndarray) -> np.ndarray:
    """
    Convert data points to a float matrix of shape (n, d).

    1-D input is interpreted as n points of dimension one.

    Args:
        data: data points, array-like of shape (n,) or (n, d).
    """
    points = np.asarray(data, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise ValueError(f"Data must be 1-D or 2-D, got {points.ndim} dimensions.")
    if points.shape[1] < 1:
        raise ValueError("Data points must have at least one coordinate.")
    if not np.all(np.isfinite(points)):
        raise ValueError("Data points must have finite coordinates.")
    return points


def _validate_fuzzifier(instance, attribute, value) -> None:
    if not value > 1.0:
        raise ValueError(f"The fuzzifier must be > 1, got {value}.")


def _as_matrix(value) -> np.ndarray:
    return np.array(value, dtype=float, ndmin=2)


@attr.s(auto_attribs=True, frozen=True, eq=False)
class MembershipMatrix:
    """
    Fuzzy partition with c rows (clusters) and n columns (data points).

    Every column sums to one and every entry lies in [0, 1].
    """

    values: np.ndarray = attr.ib(converter=_as_matrix)

    def __attrs_post_init__(self) -> None:
        if np.any(self.values < -1e-12) or np.any(self.values > 1 + 1e-12):
            raise ValueError("Membership values must lie in [0, 1].")
        column_sums = self.values.sum(axis=0)
        if not np.allclose(column_sums, 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("Membership columns must sum to 1.")

    @property
    def cluster_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def point_count(self) -> int:
        return int(self.values.shape[1])

    def hard_labels(self) -> np.ndarray:
        """Index of the cluster with the highest membership, per data point."""
        return np.argmax(self.values, axis=0)

    def partition_coefficient(self) -> float:
        """Bezdek's partition coefficient, in [1/c, 1]; higher means crisper."""
        return float(np.sum(self.values**2) / self.point_count)


@attr.s(auto_attribs=True, frozen=True, eq=False)
class ClusterSet:
    """
    Cluster centers (one row per cluster) with the fuzzifier and objective value
    they were obtained with.
    """

    centers: np.ndarray = attr.ib(converter=_as_matrix)
    fuzzifier: float = attr.ib(default=2.0, validator=_validate_fuzzifier)
    objective_value: float = 0.0

    def __attrs_post_init__(self) -> None:
        if self.centers.shape[0] < 1:
            raise ValueError("A cluster set needs at least one center.")
        if self.objective_value < 0:
            raise ValueError(f"Objective must be >= 0, got {self.objective_value}.")

    @property
    def cluster_count(self) -> int:
        return int(self.centers.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.centers.shape[1])


@attr.s(auto_attribs=True, frozen=True)
class FcmConfig:
    fuzzifier: float = attr.ib(default=2.0, validator=_validate_fuzzifier)
    tolerance: float = 1e-6
    max_iterations: int = 300
    seed: int = 0

    def __attrs_post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1.")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0.")


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (c, n)."""
    if points.shape[1] != centers.shape[1]:
        raise ValueError(
            f"Dimension mismatch: data has {points.shape[1]} coordinates, "
            f"centers have {centers.shape[1]}."
        )
    return ((centers[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)


def compute_objective(
    data: np.ndarray, memberships: MembershipMatrix, clusters: ClusterSet
) -> float:
    """
    Fuzzy C-means objective J = sum_i sum_k u_ik^m ||x_k - v_i||^2.

    Args:
        data: data points, shape (n, d).
        memberships: fuzzy partition, shape (c, n).
        clusters: centers and fuzzifier m.
    """
    points = as_data_matrix(data)
    u = memberships.values
    if u.shape != (clusters.cluster_count, points.shape[0]):
        raise ValueError(
            f"Membership shape {u.shape} does not match "
            f"{clusters.cluster_count} clusters and {points.shape[0]} points."
        )
    d2 = _squared_distances(points, clusters.centers)
    return float(np.sum(u**clusters.fuzzifier * d2))


def update_memberships(data: np.ndarray, clusters: ClusterSet) -> MembershipMatrix:
    """
    Membership update minimizing J for fixed centers.

    A point coinciding with one or more centers gets equal membership in those
    clusters and zero elsewhere.

    Args:
        data: data points, shape (n, d).
        clusters: current centers and fuzzifier.
    """
    points = as_data_matrix(data)
    d2 = _squared_distances(points, clusters.centers)
    exponent = 1.0 / (clusters.fuzzifier - 1.0)

    coincident = d2 < _COINCIDENCE_DISTANCE**2
    u = np.empty_like(d2)
    regular = ~coincident.any(axis=0)

    if np.any(regular):
        # (d_ik / d_jk)^(2/(m-1)) written on squared distances
        ratios = (d2[:, None, regular] / d2[None, :, regular]) ** exponent
        u[:, regular] = 1.0 / ratios.sum(axis=1)

    for k in np.flatnonzero(~regular):
        hits = coincident[:, k]
        u[:, k] = hits / hits.sum()

    return MembershipMatrix(u)


def update_centers(
    data: np.ndarray, memberships: MembershipMatrix, fuzzifier: float = 2.0
) -> ClusterSet:
    """
    Center update v_i = sum_k u_ik^m x_k / sum_k u_ik^m.

    The objective value of the returned cluster set is computed with the given
    memberships.

    Args:
        data: data points, shape (n, d).
        memberships: fuzzy partition, shape (c, n).
        fuzzifier: exponent m > 1.
    """
    points = as_data_matrix(data)
    if memberships.point_count != points.shape[0]:
        raise ValueError(
            f"Membership matrix has {memberships.point_count} columns "
            f"for {points.shape[0]} points."
        )
    weights = memberships.values**fuzzifier
    mass = weights.sum(axis=1)
    empty = np.flatnonzero(mass <= 0.0)
    if empty.size > 0:
        raise DegenerateClusterError(
            f"Cluster(s) {empty.tolist()} have zero membership mass."
        )
    centers = weights @ points / mass[:, None]
    clusters = ClusterSet(centers=centers, fuzzifier=fuzzifier)
    objective = compute_objective(points, memberships, clusters)
    return attr.evolve(clusters, objective_value=objective)


def initial_memberships(
    cluster_count: int, point_count: int, seed: int
) -> MembershipMatrix:
    """Random column-normalized membership matrix from a seeded generator."""
    rng = np.random.default_rng(seed)
    u = rng.random((cluster_count, point_count)) + 1e-3
    return MembershipMatrix(u / u.sum(axis=0, keepdims=True))


def run_fcm(
    data: np.ndarray, cluster_count: int, config: FcmConfig = FcmConfig()
) -> Tuple[ClusterSet, MembershipMatrix, List[float]]:
    """
    Alternate the center and membership updates until the objective settles.

    Each iteration computes the centers from the current memberships, then the
    memberships from those centers, and records J for the pair. Iterations stop
    when |delta J| < tolerance or after max_iterations.

    Args:
        data: data points, shape (n, d).
        cluster_count: number of clusters c, 1 <= c <= n.
        config: fuzzifier, stopping rule and seed.

    Returns:
        Tuple with the final clusters, memberships and the objective trace.
    """
    points = as_data_matrix(data)
    n = points.shape[0]
    if n == 0:
        raise ValueError("Cannot cluster an empty dataset.")
    if not 1 <= cluster_count <= n:
        raise ValueError(f"Cluster count must be in [1, {n}], got {cluster_count}.")

    memberships = initial_memberships(cluster_count, n, config.seed)
    trace: List[float] = []

    for iteration in range(config.max_iterations):
        clusters = update_centers(points, memberships, config.fuzzifier)
        memberships = update_memberships(points, clusters)
        objective = compute_objective(points, memberships, clusters)
        trace.append(objective)
        logger.debug(f"FCM iteration {iteration}: J = {objective}")
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) < config.tolerance:
            break
    else:
        logger.info(
            f"FCM stopped after {config.max_iterations} iterations without "
            f"reaching the tolerance {config.tolerance}."
        )

    clusters = attr.evolve(clusters, objective_value=trace[-1])
    return clusters, memberships, trace
