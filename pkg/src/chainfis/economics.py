"""
Supplier and retailer profit model and the sequential decision search.

The supplier picks its online-service effort A to maximize its profit; the
retailer then picks the price p and the order quantity Q given that effort.
"""

import logging
from typing import Tuple

import attr
import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

COARSE_POINTS = 41
# Refinement: 21 points per axis at a tenth of the coarse step, centered on the incumbent.
REFINE_HALF_WIDTH = 10
REFINE_FACTOR = 10


class InfeasibleBoxError(ValueError):
    pass


def _positive(instance, attribute, value) -> None:
    if not value > 0:
        raise ValueError(f"{attribute.name} must be > 0, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class EconomicParams:
    """
    Currency-normalized parameters of the two profit functions.

    Attributes:
        e: unit wholesale revenue of the supplier.
        c_s: unit production cost.
        c_A: online-service cost coefficient.
        c_T: transaction / logistics unit cost.
        lambda_s: supplier logistics scaling.
        lambda_: market share lost to the online channel.
        lambda_R: retailer logistics scaling.
        a: market size coefficient.
        beta: price sensitivity.
        theta: demand lift per unit of online effort.
        phi: dilution of the online effort.
        w: wholesale price paid by the retailer.
        c_R: retailer unit cost.
        c: retailer fixed-cost coefficient (divided by Q squared).
    """

    e: float = 5.0
    c_s: float = 3.0
    c_A: float = attr.ib(default=1.0, validator=_positive)
    c_T: float = 0.2
    lambda_s: float = 0.5
    lambda_: float = 0.2
    lambda_R: float = 0.1
    a: float = 1.0
    beta: float = attr.ib(default=2.0, validator=_positive)
    theta: float = 0.5
    phi: float = 0.1
    w: float = 0.5
    c_R: float = 1.0
    c: float = 5.0


@attr.s(auto_attribs=True, frozen=True)
class DecisionBounds:
    p: Tuple[float, float] = (1.0, 5.0)
    q: Tuple[float, float] = (1.0, 20.0)
    a: Tuple[float, float] = (0.0, 2.0)

    def check(self) -> None:
        for name, (low, high) in (("p", self.p), ("q", self.q), ("a", self.a)):
            if not low <= high:
                raise InfeasibleBoxError(f"Empty {name} range [{low}, {high}].")
        if not self.q[0] > 0:
            raise InfeasibleBoxError(f"The Q lower bound must be > 0, got {self.q[0]}.")
        if self.a[0] < 0:
            raise InfeasibleBoxError(f"The A lower bound must be >= 0, got {self.a[0]}.")


@attr.s(auto_attribs=True, frozen=True)
class DecisionOutcome:
    p: float
    q: float
    a: float
    supplier_profit: float
    retailer_profit: float
    coarse_retailer_profit: float


def profit_supplier(params: EconomicParams, q0, a0):
    """Q (e - c_s) - c_A A^2 / 2 - (lambda_s Q + A) c_T; broadcasts over arrays."""
    return (
        q0 * (params.e - params.c_s)
        - params.c_A * a0**2 / 2
        - (params.lambda_s * q0 + a0) * params.c_T
    )


def profit_retailer(params: EconomicParams, p0, q0, a0):
    """
    [a Q (1 - lambda) - beta p + theta A (1 - phi)] (p - c_R)
    - Q (w + lambda_R c_T) - c / Q^2; broadcasts over arrays.
    """
    demand = (
        params.a * q0 * (1 - params.lambda_)
        - params.beta * p0
        + params.theta * a0 * (1 - params.phi)
    )
    return (
        demand * (p0 - params.c_R)
        - q0 * (params.w + params.lambda_R * params.c_T)
        - params.c / q0**2
    )


def _step(bounds: Tuple[float, float]) -> float:
    return (bounds[1] - bounds[0]) / (COARSE_POINTS - 1)


def _refined_axis(center: float, bounds: Tuple[float, float]) -> np.ndarray:
    fine = _step(bounds) / REFINE_FACTOR
    if fine == 0:
        return np.array([center])
    axis = center + fine * np.arange(-REFINE_HALF_WIDTH, REFINE_HALF_WIDTH + 1)
    tolerance = fine * 1e-6
    return axis[(axis >= bounds[0] - tolerance) & (axis <= bounds[1] + tolerance)]


def _best_supplier_effort(params: EconomicParams, bounds: DecisionBounds) -> float:
    # The supplier profit is separable in A, so any Q gives the same argmax.
    q_ref = bounds.q[0]
    grid = np.linspace(bounds.a[0], bounds.a[1], COARSE_POINTS)
    best = float(grid[int(np.argmax(profit_supplier(params, q_ref, grid)))])
    refined = _refined_axis(best, bounds.a)
    values = profit_supplier(params, q_ref, refined)
    if values.max() > profit_supplier(params, q_ref, best):
        best = float(refined[int(np.argmax(values))])
    return best


def _grid_argmax(
    params: EconomicParams, p_axis: np.ndarray, q_axis: np.ndarray, a0: float
) -> Tuple[float, float, float]:
    p_grid, q_grid = np.meshgrid(p_axis, q_axis, indexing="ij")
    values = profit_retailer(params, p_grid, q_grid, a0)
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    return float(p_axis[i]), float(q_axis[j]), float(values[i, j])


def optimize_decisions(
    params: EconomicParams, bounds: DecisionBounds = DecisionBounds()
) -> DecisionOutcome:
    """
    Sequential grid search of the supplier effort and the retailer decisions.

    The effort A maximizes the supplier profit on its range. (p, Q) maximize
    the retailer profit given A: first on a 41-point grid per axis, then on
    21 points per axis at a tenth of the coarse step around the incumbent.
    The incumbent is kept on ties.

    Raises:
        InfeasibleBoxError: if a range is empty or Q is not bounded away from 0.
    """
    bounds.check()
    a0 = _best_supplier_effort(params, bounds)

    p_axis = np.linspace(bounds.p[0], bounds.p[1], COARSE_POINTS)
    q_axis = np.linspace(bounds.q[0], bounds.q[1], COARSE_POINTS)
    p0, q0, coarse_value = _grid_argmax(params, p_axis, q_axis, a0)

    p_ref, q_ref, refined_value = _grid_argmax(
        params, _refined_axis(p0, bounds.p), _refined_axis(q0, bounds.q), a0
    )
    best_value = coarse_value
    if refined_value > coarse_value:
        p0, q0, best_value = p_ref, q_ref, refined_value

    outcome = DecisionOutcome(
        p=p0,
        q=q0,
        a=a0,
        supplier_profit=float(profit_supplier(params, q0, a0)),
        retailer_profit=best_value,
        coarse_retailer_profit=coarse_value,
    )
    logger.debug(f"Decisions: {outcome}")
    return outcome
