"""
Exponential smoothing and Croston-style forecasting for intermittent demand.
"""

import logging
import math
from enum import Enum
from typing import List, Sequence, Tuple

import attr
import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

DEFAULT_ALPHA = 0.1


class ForecastDomainError(ValueError):
    """Raised when a forecast formula is evaluated outside of its domain."""


class UninitializedForecastError(ValueError):
    """Raised when a rate is requested before any non-zero demand was seen."""


class SbaVariant(Enum):
    """
    Bias-corrected rate formula.

    SHIFTED divides by (p - alpha/2); TEXTBOOK is the Syntetos-Boylan form
    (1 - alpha/2) * z / p.
    """

    SHIFTED = "shifted"
    TEXTBOOK = "textbook"

    @classmethod
    def _missing_(cls, value):
        return SBA_VARIANT_ALIASES.get(value)


# Spellings accepted besides the member values.
SBA_VARIANT_ALIASES = {"paper": SbaVariant.SHIFTED}


def _check_alpha(low_inclusive: bool):
    def validator(instance, attribute, value) -> None:
        lower_ok = value >= 0.0 if low_inclusive else value > 0.0
        if not (lower_ok and value <= 1.0):
            bracket = "[" if low_inclusive else "("
            raise ValueError(f"alpha must be in {bracket}0, 1], got {value}.")

    return validator


@attr.s(auto_attribs=True, frozen=True)
class SmoothingState:
    """Simple exponential smoothing state: smoothing constant and current forecast."""

    alpha: float = attr.ib(validator=_check_alpha(low_inclusive=True))
    forecast: float = 0.0

    def __attrs_post_init__(self) -> None:
        if not math.isfinite(self.forecast):
            raise ValueError(f"Forecast must be finite, got {self.forecast}.")


@attr.s(auto_attribs=True, frozen=True)
class DemandForecastState:
    """
    Running Croston estimates.

    Attributes:
        alpha: smoothing constant, 0 <= alpha <= 1.
        size_estimate: smoothed transaction size z_hat.
        interval_estimate: smoothed number of periods between transactions p_hat.
        last_observation_period: period of the last non-zero demand (0 before any).
        initialized: whether a non-zero demand has been observed.
    """

    alpha: float = attr.ib(
        default=DEFAULT_ALPHA, validator=_check_alpha(low_inclusive=True)
    )
    size_estimate: float = 0.0
    interval_estimate: float = 1.0
    last_observation_period: int = 0
    initialized: bool = False

    def __attrs_post_init__(self) -> None:
        if self.size_estimate < 0:
            raise ValueError(f"Size estimate must be >= 0, got {self.size_estimate}.")
        if self.interval_estimate <= 0:
            raise ValueError(
                f"Interval estimate must be > 0, got {self.interval_estimate}."
            )

    @classmethod
    def initial(cls, alpha: float = DEFAULT_ALPHA) -> "DemandForecastState":
        """State before any demand has been observed."""
        return cls(alpha=alpha)


def ses_update(state: SmoothingState, observation: float) -> SmoothingState:
    """F_{t+1} = F_t + alpha * (x_t - F_t)."""
    forecast = state.forecast + state.alpha * (observation - state.forecast)
    return attr.evolve(state, forecast=forecast)


def ses_expand(alpha: float, observations: Sequence[float], initial: float) -> float:
    """
    Unrolled smoothing: sum_j alpha (1-alpha)^j x_{t-j} + (1-alpha)^T F_0.

    Args:
        alpha: smoothing constant.
        observations: x_1 ... x_T, oldest first.
        initial: the forecast F_0 preceding the first observation.
    """
    if len(observations) == 0:
        raise ValueError("At least one observation is needed.")
    values = np.asarray(observations, dtype=float)
    lags = np.arange(len(values))[::-1]
    decay = (1.0 - alpha) ** lags
    return float(
        np.sum(alpha * decay * values) + (1.0 - alpha) ** len(values) * initial
    )


def ses_forecast_series(
    alpha: float, observations: Sequence[float], initial: float
) -> List[float]:
    """
    One-step-ahead forecasts F_0 ... F_T for a series of observations.
    """
    state = SmoothingState(alpha=alpha, forecast=initial)
    forecasts = [state.forecast]
    for observation in observations:
        state = ses_update(state, observation)
        forecasts.append(state.forecast)
    return forecasts


def croston_update(
    state: DemandForecastState, demand: float, current_period: int
) -> DemandForecastState:
    """
    Update the Croston estimates with the demand of one period.

    Zero demand leaves the state untouched. The first non-zero demand
    initializes z_hat to the demand and p_hat to its period index.

    Args:
        state: estimates after the previous period.
        demand: demand observed in the current period, >= 0.
        current_period: index of the current period, > last_observation_period.
    """
    if demand < 0:
        raise ValueError(f"Demand must be >= 0, got {demand}.")
    if current_period <= state.last_observation_period:
        raise ValueError(
            f"Period {current_period} is not after the last observation "
            f"period {state.last_observation_period}."
        )
    if demand == 0:
        return state

    interval = current_period - state.last_observation_period
    if not state.initialized:
        return attr.evolve(
            state,
            size_estimate=float(demand),
            interval_estimate=float(max(1, interval)),
            last_observation_period=current_period,
            initialized=True,
        )

    alpha = state.alpha
    return attr.evolve(
        state,
        size_estimate=alpha * demand + (1 - alpha) * state.size_estimate,
        interval_estimate=alpha * interval + (1 - alpha) * state.interval_estimate,
        last_observation_period=current_period,
    )


def _require_initialized(state: DemandForecastState) -> None:
    if not state.initialized:
        raise UninitializedForecastError(
            "No non-zero demand observed yet; the rate is undefined."
        )


def croston_rate(state: DemandForecastState) -> float:
    """Per-period demand rate c_t = z_hat / p_hat."""
    _require_initialized(state)
    return state.size_estimate / state.interval_estimate


def sba_forecast(
    state: DemandForecastState, variant: SbaVariant = SbaVariant.SHIFTED
) -> float:
    """
    Bias-corrected per-period demand forecast.

    The default (SHIFTED) form computes ((1 - alpha/2) * z_hat) / (p_hat - alpha/2).

    Raises:
        ForecastDomainError: for the SHIFTED form, when p_hat - alpha/2 <= 0.
    """
    _require_initialized(state)
    half_alpha = state.alpha / 2
    if variant is SbaVariant.TEXTBOOK:
        return (1 - half_alpha) * state.size_estimate / state.interval_estimate

    denominator = state.interval_estimate - half_alpha
    if denominator <= 0:
        raise ForecastDomainError(
            f"Denominator p_hat - alpha/2 = {denominator} must be positive."
        )
    return (1 - half_alpha) * state.size_estimate / denominator


def croston_forecast_series(
    demands: Sequence[float],
    alpha: float = DEFAULT_ALPHA,
    variant: SbaVariant = SbaVariant.SHIFTED,
) -> Tuple[List[DemandForecastState], List[float]]:
    """
    Run the Croston updates over a demand series.

    Periods are numbered from 1. Forecasts before the first non-zero demand
    are NaN.

    Returns:
        Tuple with the state after each period and the forecast for the
        following period.
    """
    state = DemandForecastState.initial(alpha)
    states: List[DemandForecastState] = []
    forecasts: List[float] = []
    for period, demand in enumerate(demands, start=1):
        state = croston_update(state, float(demand), period)
        states.append(state)
        forecasts.append(sba_forecast(state, variant) if state.initialized else math.nan)
    return states, forecasts
