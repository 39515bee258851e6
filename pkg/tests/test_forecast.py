import math

import attr
import numpy as np
import pytest

from chainfis.forecast import (
    DemandForecastState,
    ForecastDomainError,
    SbaVariant,
    SmoothingState,
    UninitializedForecastError,
    croston_forecast_series,
    croston_rate,
    croston_update,
    sba_forecast,
    ses_expand,
    ses_forecast_series,
    ses_update,
)


def _state(size: float, interval: float, alpha: float = 0.1) -> DemandForecastState:
    return DemandForecastState(
        alpha=alpha,
        size_estimate=size,
        interval_estimate=interval,
        last_observation_period=10,
        initialized=True,
    )


@pytest.mark.parametrize(
    "alpha, forecast, observation, expected",
    [(1.0, 10.0, 20.0, 20.0), (0.0, 10.0, 20.0, 10.0), (0.5, 10.0, 20.0, 15.0)],
)
def test_ses_update(alpha, forecast, observation, expected):
    state = ses_update(SmoothingState(alpha, forecast), observation)
    assert state.forecast == pytest.approx(expected)
    assert state.alpha == alpha


def test_ses_expand_single_observation():
    assert ses_expand(0.5, [4.0], 0.0) == pytest.approx(2.0)


def test_ses_expand_equals_the_recursion():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        alpha = rng.uniform(0.0, 1.0)
        observations = rng.uniform(0, 20, size=int(rng.integers(1, 51)))
        initial = rng.uniform(0, 20)
        folded = ses_forecast_series(alpha, observations, initial)[-1]
        assert ses_expand(alpha, observations, initial) == pytest.approx(folded, abs=1e-12)


def test_ses_expand_fixed_point():
    assert ses_expand(0.3, [7.0] * 12, 7.0) == pytest.approx(7.0)


def test_ses_rejects_invalid_alpha():
    with pytest.raises(ValueError):
        SmoothingState(alpha=1.5)
    with pytest.raises(ValueError):
        ses_expand(0.5, [], 0.0)


def test_zero_demand_leaves_the_state_unchanged():
    state = _state(8.0, 3.0)
    assert croston_update(state, 0.0, 11) == state


def test_size_and_interval_updates():
    assert croston_update(_state(8.0, 3.0), 10.0, 15).size_estimate == pytest.approx(8.2)
    # gap of 5 periods since period 10
    assert croston_update(_state(8.0, 3.0), 10.0, 15).interval_estimate == pytest.approx(3.2)
    assert croston_update(_state(8.0, 3.0), 10.0, 15).last_observation_period == 15


def test_first_demand_initializes_the_estimates():
    state = croston_update(DemandForecastState.initial(0.1), 6.0, 4)
    assert state.initialized
    assert state.size_estimate == 6.0
    assert state.interval_estimate == 4.0


def test_croston_update_rejects_bad_input():
    with pytest.raises(ValueError):
        croston_update(_state(8.0, 3.0), -1.0, 11)
    with pytest.raises(ValueError):
        croston_update(_state(8.0, 3.0), 1.0, 10)


def test_croston_rate():
    assert croston_rate(_state(8.2, 2.0)) == pytest.approx(4.1)
    assert croston_rate(_state(0.0, 2.0)) == 0.0


def test_steady_demand_rate_converges():
    state = DemandForecastState.initial(0.1)
    for period in range(1, 201):
        state = croston_update(state, 5.0, period)
    assert croston_rate(state) == pytest.approx(5.0, abs=1e-3)


def test_sba_forecast():
    assert sba_forecast(_state(10.0, 2.0)) == pytest.approx(0.95 * 10 / 1.95)
    assert sba_forecast(_state(10.0, 2.0), SbaVariant.TEXTBOOK) == pytest.approx(4.75)


def test_sba_with_zero_alpha_is_the_croston_rate():
    state = _state(7.0, 3.0, alpha=0.0)
    assert sba_forecast(state) == croston_rate(state)


def test_sba_domain_error():
    with pytest.raises(ForecastDomainError):
        sba_forecast(_state(10.0, 0.05))
    # the textbook form has no singular denominator
    assert sba_forecast(_state(10.0, 0.05), SbaVariant.TEXTBOOK) > 0


def test_rates_need_a_demand():
    with pytest.raises(UninitializedForecastError):
        croston_rate(DemandForecastState.initial())
    with pytest.raises(UninitializedForecastError):
        sba_forecast(DemandForecastState.initial())


def test_forecast_series():
    states, forecasts = croston_forecast_series([0, 0, 4, 0, 6, 0, 0, 5], alpha=0.2)
    assert len(states) == len(forecasts) == 8
    assert math.isnan(forecasts[0]) and math.isnan(forecasts[1])
    assert all(f >= 0 for f in forecasts[2:])
    assert states[2] == attr.evolve(
        DemandForecastState.initial(0.2),
        size_estimate=4.0,
        interval_estimate=3.0,
        last_observation_period=3,
        initialized=True,
    )
    assert states[3] == states[2]
