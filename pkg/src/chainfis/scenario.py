import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Tuple, Type, TypeVar

import attr
from rxn.utilities.files import PathLike

from .economics import DecisionBounds, EconomicParams
from .forecast import DEFAULT_ALPHA, SbaVariant

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

REFERENCE_SCENARIO = Path(__file__).parent / "data" / "reference_scenario.json"

# Signing order of the stakeholders; a scenario with n signers uses the first n.
SIGNER_ORDER = ("retailer", "distributor", "auditor", "producer", "supplier")

T = TypeVar("T")


class ScenarioError(ValueError):
    pass


def _in_unit_interval(instance, attribute, value) -> None:
    if not 0 <= value <= 1:
        raise ScenarioError(f"{attribute.name} must be in [0, 1], got {value}.")


def _non_negative(instance, attribute, value) -> None:
    if value < 0:
        raise ScenarioError(f"{attribute.name} must be >= 0, got {value}.")


def _positive(instance, attribute, value) -> None:
    if not value > 0:
        raise ScenarioError(f"{attribute.name} must be > 0, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class DemandConfig:
    """
    Compound intermittent demand: a transaction occurs with some probability
    each day; its size is a rounded lognormal draw (at least one unit).
    """

    occurrence_probability: float = attr.ib(default=0.3, validator=_in_unit_interval)
    size_log_mean: float = math.log(11.0) - 0.08
    size_log_sigma: float = attr.ib(default=0.4, validator=_non_negative)
    warmup_periods: int = attr.ib(default=30, validator=_non_negative)


@attr.s(auto_attribs=True, frozen=True)
class PolicyConfig:
    baseline_review_days: int = attr.ib(default=5, validator=_positive)
    baseline_quantity: int = attr.ib(default=6, validator=_positive)
    alpha: float = attr.ib(default=DEFAULT_ALPHA, validator=_in_unit_interval)
    safety_stock: float = attr.ib(default=12.0, validator=_non_negative)
    horizon_periods: int = attr.ib(default=3, validator=_non_negative)
    sba_variant: SbaVariant = attr.ib(default=SbaVariant.SHIFTED, converter=SbaVariant)


@attr.s(auto_attribs=True, frozen=True)
class LogisticsConfig:
    """
    Node stock levels, lead times and the delivery-time model.

    Upstream nodes follow (s, S) rules with S equal to their initial stock.
    Delivery minutes = base + congestion * order backlog at dispatch.
    """

    retailer_initial_stock: int = attr.ib(default=12, validator=_non_negative)
    retailer_lead_days: int = attr.ib(default=2, validator=_positive)
    distributor_initial_stock: int = attr.ib(default=150, validator=_non_negative)
    distributor_reorder_point: int = attr.ib(default=100, validator=_non_negative)
    producer_initial_stock: int = attr.ib(default=300, validator=_non_negative)
    producer_reorder_point: int = attr.ib(default=200, validator=_non_negative)
    supplier_initial_stock: int = attr.ib(default=500, validator=_non_negative)
    supplier_reorder_point: int = attr.ib(default=300, validator=_non_negative)
    upstream_lead_days: int = attr.ib(default=2, validator=_positive)
    production_lead_days: int = attr.ib(default=2, validator=_positive)
    base_delivery_minutes: float = attr.ib(default=35.0, validator=_non_negative)
    congestion_minutes_per_unit: float = attr.ib(default=0.25, validator=_non_negative)
    damage_rate: float = attr.ib(default=0.0001, validator=_in_unit_interval)


@attr.s(auto_attribs=True, frozen=True)
class LedgerConfig:
    k: int = 2
    n: int = 3
    key_seed: int = 0

    def __attrs_post_init__(self) -> None:
        if not 1 <= self.n <= len(SIGNER_ORDER):
            raise ScenarioError(f"ledger.n must be in [1, {len(SIGNER_ORDER)}], got {self.n}.")
        if not 1 <= self.k <= self.n:
            raise ScenarioError(f"ledger.k must be in [1, {self.n}], got {self.k}.")

    @property
    def signers(self) -> Tuple[str, ...]:
        return SIGNER_ORDER[: self.n]


@attr.s(auto_attribs=True, frozen=True)
class PerturbationConfig:
    """Demand-rate factors and retailer lead-time offsets of the state sweep."""

    demand_factors: Tuple[float, ...] = attr.ib(default=(0.95, 1.0, 1.05), converter=tuple)
    lead_offsets: Tuple[int, ...] = attr.ib(default=(-1, 0, 1), converter=tuple)
    replications: int = attr.ib(default=10, validator=_positive)


@attr.s(auto_attribs=True, frozen=True)
class EconomicsConfig:
    params: EconomicParams = EconomicParams()
    bounds: DecisionBounds = DecisionBounds()


@attr.s(auto_attribs=True, frozen=True)
class Scenario:
    horizon_days: int = attr.ib(default=30, validator=_positive)
    seed: int = attr.ib(default=42, validator=_non_negative)
    replications: int = attr.ib(default=50, validator=_positive)
    start_epoch: int = attr.ib(default=1_700_000_000, validator=_non_negative)
    demand: DemandConfig = DemandConfig()
    policy: PolicyConfig = PolicyConfig()
    logistics: LogisticsConfig = LogisticsConfig()
    ledger: LedgerConfig = LedgerConfig()
    economics: EconomicsConfig = EconomicsConfig()
    perturbations: PerturbationConfig = PerturbationConfig()

    def __attrs_post_init__(self) -> None:
        for offset in self.perturbations.lead_offsets:
            if self.logistics.retailer_lead_days + offset < 1:
                raise ScenarioError(
                    f"Lead offset {offset} gives a retailer lead time below one day."
                )

    def with_seed(self, seed: int) -> "Scenario":
        return attr.evolve(self, seed=seed)


def _build(cls: Type[T], content: Any, section: str) -> T:
    if not isinstance(content, dict):
        raise ScenarioError(f'Section "{section}" must be an object.')
    names = {f.name for f in attr.fields(cls)}
    unknown = sorted(set(content) - names)
    if unknown:
        raise ScenarioError(f'Unknown key(s) in "{section}": {", ".join(unknown)}.')
    try:
        return cls(**content)
    except ScenarioError:
        raise
    except (TypeError, ValueError) as e:
        raise ScenarioError(f'Invalid "{section}" section: {e}') from e


def scenario_from_dict(content: Dict[str, Any]) -> Scenario:
    content = dict(content)
    sections: Dict[str, Any] = {}
    for name, cls in (
        ("demand", DemandConfig),
        ("policy", PolicyConfig),
        ("logistics", LogisticsConfig),
        ("ledger", LedgerConfig),
        ("perturbations", PerturbationConfig),
    ):
        if name in content:
            sections[name] = _build(cls, content.pop(name), name)
    if "economics" in content:
        economics = dict(content.pop("economics"))
        bounds = economics.pop("bounds", {})
        if not isinstance(bounds, dict):
            raise ScenarioError('Section "economics.bounds" must be an object.')
        sections["economics"] = EconomicsConfig(
            params=_build(EconomicParams, economics, "economics"),
            bounds=_build(
                DecisionBounds,
                {k: tuple(v) for k, v in bounds.items()},
                "economics.bounds",
            ),
        )
    content.update(sections)
    return _build(Scenario, content, "scenario")


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    def serialize(instance, field, value):
        if isinstance(value, SbaVariant):
            return value.value
        if isinstance(value, tuple):
            return list(value)
        return value

    content = attr.asdict(scenario, value_serializer=serialize)
    economics = content.pop("economics")
    content["economics"] = dict(economics["params"], bounds=economics["bounds"])
    return content


def load_scenario(path: PathLike) -> Scenario:
    """
    Read a JSON scenario; missing keys take their defaults.

    Raises:
        ScenarioError: for invalid JSON, unknown keys or invalid values.
    """
    with open(path, "rt") as f:
        try:
            content = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f'"{path}" is not valid JSON (line {e.lineno}): {e.msg}') from e
    if not isinstance(content, dict):
        raise ScenarioError(f'"{path}" must hold a JSON object.')
    scenario = scenario_from_dict(content)
    logger.info(f'Loaded scenario from "{path}".')
    return scenario


def reference_scenario() -> Scenario:
    return load_scenario(REFERENCE_SCENARIO)


def resolve_scenario(name_or_path: str) -> Scenario:
    """``reference`` or a path to a scenario file."""
    if name_or_path == "reference":
        return reference_scenario()
    return load_scenario(name_or_path)
