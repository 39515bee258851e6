import logging
import math
from typing import Optional

import attr

from .forecast import DemandForecastState, SbaVariant, sba_forecast
from .ledger import EventKind, SupplyChainEvent

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


def _non_negative(instance, attribute, value) -> None:
    if value < 0:
        raise ValueError(f"{attribute.name} must be >= 0, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class ReorderParams:
    """
    Order-up-to rule: target = forecast rate * horizon_periods + safety_stock.
    """

    safety_stock: float = attr.ib(default=0.0, validator=_non_negative)
    horizon_periods: int = attr.ib(default=1, validator=_non_negative)
    sba_variant: SbaVariant = SbaVariant.SHIFTED


def order_up_to_level(
    forecast_state: DemandForecastState, params: ReorderParams
) -> float:
    rate = sba_forecast(forecast_state, params.sba_variant)
    return rate * params.horizon_periods + params.safety_stock


def evaluate_reorder_contract(
    inventory_on_hand: float,
    forecast_state: DemandForecastState,
    params: ReorderParams,
    period: int = 0,
    location: str = "retailer",
    timestamp: int = 0,
) -> Optional[SupplyChainEvent]:
    """
    Propose a purchase order when the forecast needs exceed the stock.

    Args:
        inventory_on_hand: current stock (or inventory position).
        forecast_state: Croston estimates of the demand.
        params: order-up-to parameters.
        period: period recorded in the Reorder payload.
        location: location recorded in the Reorder payload.
        timestamp: event timestamp, epoch seconds.

    Returns:
        A Reorder event for ceil(target - inventory_on_hand) units, or None
        when the inventory covers the target.
    """
    target = order_up_to_level(forecast_state, params)
    if inventory_on_hand >= target:
        return None
    quantity = int(math.ceil(target - inventory_on_hand))
    logger.debug(
        f"Reorder of {quantity} unit(s) at period {period}: "
        f"inventory {inventory_on_hand} below target {target:.4g}."
    )
    return SupplyChainEvent(
        kind=EventKind.REORDER,
        payload={"quantity": quantity, "period": period, "location": location},
        timestamp=timestamp,
    )
