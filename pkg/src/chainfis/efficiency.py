import logging
from enum import Enum
from typing import Sequence, Tuple

import attr
import numpy as np

from .fcm import ClusterSet, update_memberships

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class EfficiencyClass(Enum):
    """Supply management assessment, in one-hot slot order."""

    PERFECT = "Perfect"
    GOOD = "Good"
    MEDIUM = "Medium"
    POOR = "Poor"

    @property
    def index(self) -> int:
        return list(EfficiencyClass).index(self)


@attr.s(auto_attribs=True, frozen=True)
class EfficiencyAssessment:
    label: EfficiencyClass
    one_hot: Tuple[int, int, int, int]

    @classmethod
    def from_label(cls, label: EfficiencyClass) -> "EfficiencyAssessment":
        bits = [0, 0, 0, 0]
        bits[label.index] = 1
        return cls(label=label, one_hot=(bits[0], bits[1], bits[2], bits[3]))


def classify_efficiency(scores: Sequence[float]) -> EfficiencyAssessment:
    """
    One-hot efficiency class from four scores (Perfect, Good, Medium, Poor).

    Ties go to the lowest index.
    """
    values = np.asarray(scores, dtype=float)
    if values.shape != (4,):
        raise ValueError(f"Expected 4 scores, got shape {values.shape}.")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"Scores must be finite, got {values.tolist()}.")
    return EfficiencyAssessment.from_label(list(EfficiencyClass)[int(np.argmax(values))])


# Prototype KPI vectors (fill rate, on-time share, 1 - stock-out day share).
KPI_PROTOTYPES = np.array(
    [
        [1.0, 1.0, 1.0],
        [0.9, 0.9, 0.9],
        [0.75, 0.75, 0.75],
        [0.5, 0.5, 0.5],
    ]
)


def efficiency_scores(kpis: Sequence[float]) -> np.ndarray:
    """
    Graded membership of a KPI vector in the four efficiency classes.

    The scores sum to one; they use the fuzzy C-means membership rule with
    the class prototypes as fixed centers.
    """
    vector = np.asarray(kpis, dtype=float)
    if vector.shape != (KPI_PROTOTYPES.shape[1],):
        raise ValueError(
            f"Expected {KPI_PROTOTYPES.shape[1]} KPIs, got shape {vector.shape}."
        )
    memberships = update_memberships(vector.reshape(1, -1), ClusterSet(KPI_PROTOTYPES))
    return memberships.values[:, 0]


def assess_kpis(kpis: Sequence[float]) -> EfficiencyAssessment:
    return classify_efficiency(efficiency_scores(kpis))
