"""
Day-stepped four-node supply chain: supplier, producer, distributor, retailer.

Each day, in order: shipments arrive; upstream nodes fill their backorders
(FIFO); the retailer serves customer demand (unmet demand is lost); the
retailer policy decides a reorder; upstream nodes reorder with (s, S) rules.
Under the ANFIS policy the reorder is proposed by the reorder contract and
only committed once K of the N required stakeholders signed it on the ledger.
"""

import copy
import logging
from enum import Enum
from typing import Dict, List, Optional, Tuple

import attr
import numpy as np

from .economics import DecisionOutcome, optimize_decisions, profit_retailer, profit_supplier
from .efficiency import EfficiencyAssessment, classify_efficiency, efficiency_scores
from .forecast import DemandForecastState, croston_update
from .indicators import INDICATOR_COLUMNS, IndicatorRecord
from .ledger import (
    EventKind,
    LedgerChain,
    LedgerError,
    PendingTransaction,
    Stakeholder,
    StakeholderRole,
    SigningWorkflow,
    SupplyChainEvent,
    register_signer,
    verify_chain,
)
from .reorder_contract import ReorderParams, evaluate_reorder_contract
from .scenario import SIGNER_ORDER, DemandConfig, Scenario
from .signing import derive_key

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SECONDS_PER_DAY = 86_400
WARMUP_STREAM = 0
HORIZON_STREAM = 1
# Daily indicator columns, C3 included.
DAILY_COLUMNS = INDICATOR_COLUMNS + ("delivery_error_c3",)


class SimulationError(RuntimeError):
    pass


class PolicyKind(Enum):
    BASELINE = "baseline"
    ANFIS = "anfis"


class NodeRole(Enum):
    SUPPLIER = "supplier"
    PRODUCER = "producer"
    DISTRIBUTOR = "distributor"
    RETAILER = "retailer"


# Each node with the node that replenishes it; the supplier produces its own stock.
UPSTREAM = {
    NodeRole.RETAILER: NodeRole.DISTRIBUTOR,
    NodeRole.DISTRIBUTOR: NodeRole.PRODUCER,
    NodeRole.PRODUCER: NodeRole.SUPPLIER,
}


@attr.s(auto_attribs=True, frozen=True)
class DemandProcess:
    """
    Compound intermittent demand with exactly two draws per day.

    Each (replication, stream, day) has its own generator, so the stream does
    not depend on what a policy does with it.
    """

    config: DemandConfig
    seed: int
    replication: int = 0
    factor: float = 1.0

    def draw(self, day: int, stream: int = HORIZON_STREAM) -> int:
        rng = np.random.default_rng([self.seed, self.replication, stream, day])
        occurs = rng.random() < min(1.0, self.config.occurrence_probability * self.factor)
        size = rng.lognormal(self.config.size_log_mean, self.config.size_log_sigma)
        return max(1, int(round(size))) if occurs else 0


@attr.s(auto_attribs=True)
class Shipment:
    quantity: int
    order_day: int
    dispatch_day: int
    arrival_day: int
    delivery_minutes: float = 0.0


@attr.s(auto_attribs=True)
class PendingOrder:
    quantity: int
    order_day: int


@attr.s(auto_attribs=True)
class NodeState:
    """
    Attributes:
        role: position in the chain.
        inventory: on-hand units, never negative.
        pipeline: inbound shipments in transit.
        backorders: unfilled downstream orders, oldest first.
        service_level: share of requested units filled at request time.
    """

    role: NodeRole
    inventory: int
    pipeline: List[Shipment] = attr.Factory(list)
    backorders: List[PendingOrder] = attr.Factory(list)
    service_level: float = 1.0
    requested: int = 0
    filled_on_request: int = 0
    shipped: int = 0
    received: int = 0

    @property
    def in_transit(self) -> int:
        return sum(s.quantity for s in self.pipeline)

    @property
    def owed(self) -> int:
        return sum(o.quantity for o in self.backorders)


@attr.s(auto_attribs=True)
class RetailerStats:
    """Cumulative retailer counters of one replication."""

    demand: int = 0
    served: int = 0
    lost: int = 0
    ordered: int = 0
    received: int = 0
    arrivals: int = 0
    on_time: int = 0
    lead_days: int = 0
    short_shipped: int = 0
    stockout_days: int = 0
    inventory_sum: float = 0.0
    days: int = 0
    previous_total: int = 0
    delivery_minutes: List[float] = attr.Factory(list)
    order_quantities: List[int] = attr.Factory(list)
    order_days: List[int] = attr.Factory(list)
    demand_log: List[int] = attr.Factory(list)


@attr.s(auto_attribs=True)
class ChainState:
    nodes: Dict[NodeRole, NodeState]
    forecast: DemandForecastState
    demand: DemandProcess
    stats: RetailerStats = attr.Factory(RetailerStats)
    lead_offset: int = 0
    ledger: Optional[LedgerChain] = None

    def copy(self) -> "ChainState":
        # Forecast, demand process and ledger are immutable values.
        return attr.evolve(
            self, nodes=copy.deepcopy(self.nodes), stats=copy.deepcopy(self.stats)
        )

    def total_inventory(self) -> int:
        return sum(n.inventory for n in self.nodes.values())

    def total_in_transit(self) -> int:
        return sum(n.in_transit for n in self.nodes.values())


@attr.s(auto_attribs=True, frozen=True)
class DayRecord:
    day: int
    demand: int
    served: int
    lost: int
    retailer_inventory: int
    reorder_quantity: int
    arrivals: Tuple[Shipment, ...]
    indicators: IndicatorRecord


@attr.s(auto_attribs=True, frozen=True)
class DayOutcome:
    state: ChainState
    record: DayRecord
    transactions: Tuple[PendingTransaction, ...] = ()


@attr.s(auto_attribs=True, frozen=True, eq=False)
class SimulationMetrics:
    """
    Per-policy results averaged over the replications.

    The daily indicator records are the per-day means; ``summary`` is their
    mean over the horizon.
    """

    policy: PolicyKind
    avg_delivery_time_minutes: float
    avg_reorder_interval_days: float
    avg_order_quantity: float
    daily: List[IndicatorRecord]
    summary: IndicatorRecord
    kpis: Tuple[float, float, float]
    efficiency_scores: np.ndarray
    efficiency: EfficiencyAssessment
    fill_rate: float
    lost_sales: float
    reorder_count: float
    supplier_profit: float = 0.0
    retailer_profit: float = 0.0


@attr.s(auto_attribs=True, frozen=True, eq=False)
class PolicyRun:
    metrics: SimulationMetrics
    demand_logs: List[List[int]]
    committed_reorders: List[int]
    chains: List[LedgerChain]


@attr.s(auto_attribs=True, frozen=True, eq=False)
class StateVector:
    """Efficiency scores of one perturbed scenario state."""

    name: str
    demand_factor: float
    lead_offset: int
    scores: np.ndarray
    efficiency: EfficiencyAssessment


@attr.s(auto_attribs=True, frozen=True, eq=False)
class SimulationResult:
    metrics: Dict[PolicyKind, SimulationMetrics]
    chain: LedgerChain
    states: List[StateVector]
    decisions: DecisionOutcome
    demand_logs: Dict[PolicyKind, List[List[int]]]


def make_stakeholders(scenario: Scenario) -> Dict[str, Stakeholder]:
    return {
        name: Stakeholder(
            id=name,
            role=StakeholderRole(name),
            key=derive_key(name, scenario.ledger.key_seed),
        )
        for name in SIGNER_ORDER
    }


def _timestamp(scenario: Scenario, day: int) -> int:
    return scenario.start_epoch + day * SECONDS_PER_DAY


def initial_state(
    scenario: Scenario,
    policy: PolicyKind,
    replication: int = 0,
    demand_factor: float = 1.0,
    lead_offset: int = 0,
) -> ChainState:
    """
    Stocked nodes, a warmed-up forecast and, for the ANFIS policy, a ledger
    with all stakeholders registered.
    """
    logistics = scenario.logistics
    nodes = {
        NodeRole.SUPPLIER: NodeState(NodeRole.SUPPLIER, logistics.supplier_initial_stock),
        NodeRole.PRODUCER: NodeState(NodeRole.PRODUCER, logistics.producer_initial_stock),
        NodeRole.DISTRIBUTOR: NodeState(
            NodeRole.DISTRIBUTOR, logistics.distributor_initial_stock
        ),
        NodeRole.RETAILER: NodeState(NodeRole.RETAILER, logistics.retailer_initial_stock),
    }
    demand = DemandProcess(scenario.demand, scenario.seed, replication, demand_factor)

    forecast = DemandForecastState.initial(scenario.policy.alpha)
    for period in range(1, scenario.demand.warmup_periods + 1):
        forecast = croston_update(forecast, demand.draw(period, WARMUP_STREAM), period)

    ledger = None
    if policy is PolicyKind.ANFIS:
        ledger = LedgerChain.create(timestamp=scenario.start_epoch)
        for stakeholder in make_stakeholders(scenario).values():
            ledger = register_signer(ledger, stakeholder, scenario.start_epoch)

    state = ChainState(
        nodes=nodes, forecast=forecast, demand=demand, lead_offset=lead_offset, ledger=ledger
    )
    state.stats.previous_total = state.total_inventory()
    return state


def _ship(
    upstream: NodeState,
    downstream: NodeState,
    quantity: int,
    order_day: int,
    day: int,
    lead_days: int,
    minutes: float,
) -> None:
    upstream.inventory -= quantity
    upstream.shipped += quantity
    downstream.pipeline.append(
        Shipment(quantity, order_day, day, day + lead_days, minutes)
    )


def _place_order(
    upstream: NodeState,
    downstream: NodeState,
    quantity: int,
    day: int,
    lead_days: int,
    minutes: float,
) -> int:
    """Ship what is available now and queue the rest; returns the queued units."""
    upstream.requested += quantity
    now = min(quantity, upstream.inventory) if not upstream.backorders else 0
    if now > 0:
        _ship(upstream, downstream, now, day, day, lead_days, minutes)
    upstream.filled_on_request += now
    upstream.service_level = upstream.filled_on_request / upstream.requested
    remainder = quantity - now
    if remainder > 0:
        upstream.backorders.append(PendingOrder(remainder, day))
    return remainder


def _fill_backorders(
    upstream: NodeState, downstream: NodeState, day: int, lead_days: int, minutes: float
) -> None:
    while upstream.backorders and upstream.inventory > 0:
        order = upstream.backorders[0]
        quantity = min(order.quantity, upstream.inventory)
        _ship(upstream, downstream, quantity, order.order_day, day, lead_days, minutes)
        order.quantity -= quantity
        if order.quantity == 0:
            upstream.backorders.pop(0)


def _receive(node: NodeState, day: int) -> List[Shipment]:
    arrived = [s for s in node.pipeline if s.arrival_day <= day]
    node.pipeline = [s for s in node.pipeline if s.arrival_day > day]
    for shipment in arrived:
        node.inventory += shipment.quantity
        node.received += shipment.quantity
    return arrived


def order_backlog(state: ChainState, scenario: Scenario) -> int:
    """
    Units of retailer demand not yet covered by its initial stock or its
    orders, plus the units the distributor still owes the retailer.
    """
    stats = state.stats
    uncovered = stats.demand - scenario.logistics.retailer_initial_stock - stats.ordered
    return max(0, uncovered) + state.nodes[NodeRole.DISTRIBUTOR].owed


def delivery_minutes(state: ChainState, scenario: Scenario) -> float:
    """Delivery time of a retailer shipment dispatched now."""
    logistics = scenario.logistics
    return logistics.base_delivery_minutes + logistics.congestion_minutes_per_unit * (
        order_backlog(state, scenario)
    )


def _lead_days(scenario: Scenario, role: NodeRole, lead_offset: int) -> int:
    if role is NodeRole.RETAILER:
        return scenario.logistics.retailer_lead_days + lead_offset
    return scenario.logistics.upstream_lead_days


def _upstream_reorders(state: ChainState, scenario: Scenario, day: int) -> None:
    logistics = scenario.logistics
    nodes = state.nodes
    levels = {
        NodeRole.DISTRIBUTOR: (
            logistics.distributor_reorder_point,
            logistics.distributor_initial_stock,
        ),
        NodeRole.PRODUCER: (logistics.producer_reorder_point, logistics.producer_initial_stock),
    }
    for role, (reorder_point, order_up_to) in levels.items():
        node, upstream = nodes[role], nodes[UPSTREAM[role]]
        position = node.inventory + node.in_transit + upstream.owed - node.owed
        if position <= reorder_point and order_up_to > position:
            _place_order(
                upstream,
                node,
                order_up_to - position,
                day,
                _lead_days(scenario, role, 0),
                0.0,
            )

    supplier = nodes[NodeRole.SUPPLIER]
    position = supplier.inventory + supplier.in_transit - supplier.owed
    if position <= logistics.supplier_reorder_point:
        batch = logistics.supplier_initial_stock - position
        if batch > 0:
            supplier.pipeline.append(
                Shipment(batch, day, day, day + logistics.production_lead_days)
            )


def _check_flows(state: ChainState) -> None:
    for role, upstream_role in UPSTREAM.items():
        node, upstream = state.nodes[role], state.nodes[upstream_role]
        if upstream.shipped != node.received + node.in_transit:
            raise SimulationError(
                f"Flow imbalance on {upstream_role.value} -> {role.value}: shipped "
                f"{upstream.shipped}, received {node.received}, in transit {node.in_transit}."
            )
    for node in state.nodes.values():
        if node.inventory < 0:
            raise SimulationError(f"Negative inventory at the {node.role.value}.")


def _ratio(numerator: float, denominator: float, default: float) -> float:
    return numerator / denominator if denominator > 0 else default


def _daily_indicators(
    state: ChainState, scenario: Scenario, day: int, demand: int, served: int
) -> IndicatorRecord:
    stats = state.stats
    total = state.total_inventory()
    in_transit = state.total_in_transit()
    fill = _ratio(stats.served, stats.demand, 1.0)
    on_time = _ratio(stats.on_time, stats.arrivals, 1.0)
    nominal_lead = scenario.logistics.retailer_lead_days + state.lead_offset
    material = 100 * _ratio(total - stats.previous_total, stats.previous_total, 0.0)
    mean_inventory = stats.inventory_sum / stats.days
    return IndicatorRecord(
        stage=str(day),
        quality_p1=100 * _ratio(served, demand, 1.0),
        material_p2=float(np.clip(material, -100, 100)),
        logistic_p3=100 * _ratio(in_transit, total + in_transit, 0.0),
        purchase_p4=100 * _ratio(stats.received, stats.ordered, 1.0),
        order_plan_l1=100 * min(1.0, _ratio(stats.ordered, stats.demand, 1.0)),
        order_speed_l2=_ratio(stats.lead_days, stats.arrivals, float(nominal_lead)),
        delivery_c1=100 * on_time,
        volume_c2=100 * fill,
        node_satisfaction_c4=1 + 4 * fill * on_time,
        outbound_error_s1=100 * _ratio(stats.lost, stats.demand, 0.0),
        damage_s2=100 * scenario.logistics.damage_rate,
        turnover_s3=stats.served / max(1.0, mean_inventory),
        zero_inventory=stats.stockout_days / stats.days,
        delivery_error_c3=100 * _ratio(stats.short_shipped, stats.ordered, 0.0),
    )


def _ledger_transactions(
    workflow: SigningWorkflow,
    scenario: Scenario,
    stakeholders: Dict[str, Stakeholder],
    reorder: Optional[SupplyChainEvent],
    measurement: SupplyChainEvent,
) -> List[PendingTransaction]:
    transactions = []
    if reorder is not None:
        tx = workflow.propose([reorder], scenario.ledger.signers, scenario.ledger.k)
        for signer in scenario.ledger.signers[: scenario.ledger.k]:
            tx = workflow.sign(tx, stakeholders[signer])
        transactions.append(tx)
    tx = workflow.propose([measurement], ["auditor"], 1)
    transactions.append(workflow.sign(tx, stakeholders["auditor"]))
    return transactions


def step_day(
    state: ChainState, day: int, policy: PolicyKind, scenario: Scenario
) -> DayOutcome:
    """
    Advance the chain by one day.

    The input state is left untouched.

    Args:
        state: state at the end of the previous day.
        day: day index, starting at 1.
        policy: retailer reorder policy.
        scenario: simulation parameters.

    Returns:
        The new state, the day record and the transactions sealed that day.
    """
    state = state.copy()
    nodes, stats = state.nodes, state.stats
    retailer = nodes[NodeRole.RETAILER]
    distributor = nodes[NodeRole.DISTRIBUTOR]
    timestamp = _timestamp(scenario, day)

    arrivals: List[Shipment] = []
    for role, node in nodes.items():
        arrived = _receive(node, day)
        if role is NodeRole.RETAILER:
            arrivals = arrived
    nominal_lead = _lead_days(scenario, NodeRole.RETAILER, state.lead_offset)
    for shipment in arrivals:
        lead = shipment.arrival_day - shipment.order_day
        stats.arrivals += 1
        stats.received += shipment.quantity
        stats.lead_days += lead
        stats.on_time += int(lead <= nominal_lead)
        stats.delivery_minutes.append(shipment.delivery_minutes)

    for role, upstream_role in UPSTREAM.items():
        minutes = delivery_minutes(state, scenario) if role is NodeRole.RETAILER else 0.0
        _fill_backorders(
            nodes[upstream_role],
            nodes[role],
            day,
            _lead_days(scenario, role, state.lead_offset),
            minutes,
        )

    demand = state.demand.draw(day)
    served = min(demand, retailer.inventory)
    lost = demand - served
    retailer.inventory -= served
    retailer.requested += demand
    retailer.filled_on_request += served
    retailer.service_level = _ratio(retailer.filled_on_request, retailer.requested, 1.0)
    stats.demand += demand
    stats.served += served
    stats.lost += lost
    stats.demand_log.append(demand)
    state.forecast = croston_update(
        state.forecast, demand, scenario.demand.warmup_periods + day
    )

    quantity = 0
    transactions: Tuple[PendingTransaction, ...] = ()
    if policy is PolicyKind.BASELINE:
        if day % scenario.policy.baseline_review_days == 0:
            quantity = scenario.policy.baseline_quantity
    else:
        reorder = None
        if state.forecast.initialized:
            position = retailer.inventory + retailer.in_transit + distributor.owed
            reorder = evaluate_reorder_contract(
                position,
                state.forecast,
                ReorderParams(
                    safety_stock=scenario.policy.safety_stock,
                    horizon_periods=scenario.policy.horizon_periods,
                    sba_variant=scenario.policy.sba_variant,
                ),
                period=day,
                location=NodeRole.RETAILER.value,
                timestamp=timestamp,
            )
        measurement = SupplyChainEvent(
            kind=EventKind.MEASUREMENT,
            payload={
                "production_type": "broiler",
                "period": day,
                "location": NodeRole.RETAILER.value,
                "validator_id": "auditor",
                "demand": demand,
                "served": served,
                "on_hand": retailer.inventory,
            },
            timestamp=timestamp,
        )
        if state.ledger is None:
            raise SimulationError("The ANFIS policy needs a ledger.")
        workflow = SigningWorkflow(state.ledger)
        try:
            pending = _ledger_transactions(
                workflow, scenario, make_stakeholders(scenario), reorder, measurement
            )
            block = workflow.seal(pending, timestamp)
        except LedgerError as e:
            logger.error(f"Day {day}: ledger commit failed.")
            raise SimulationError(f"Ledger commit failed on day {day}: {e}") from e
        state.ledger = workflow.chain
        transactions = block.transactions
        if reorder is not None:
            quantity = int(reorder.payload["quantity"])

    if quantity > 0:
        stats.ordered += quantity
        stats.order_quantities.append(quantity)
        stats.order_days.append(day)
        stats.short_shipped += _place_order(
            distributor,
            retailer,
            quantity,
            day,
            nominal_lead,
            delivery_minutes(state, scenario),
        )

    _upstream_reorders(state, scenario, day)

    stats.days += 1
    stats.inventory_sum += retailer.inventory
    if lost > 0 or retailer.inventory == 0:
        stats.stockout_days += 1
    indicators = _daily_indicators(state, scenario, day, demand, served)
    stats.previous_total = state.total_inventory()
    _check_flows(state)

    record = DayRecord(
        day=day,
        demand=demand,
        served=served,
        lost=lost,
        retailer_inventory=retailer.inventory,
        reorder_quantity=quantity,
        arrivals=tuple(arrivals),
        indicators=indicators,
    )
    logger.debug(
        f"Day {day} ({policy.value}): demand {demand}, served {served}, order {quantity}"
    )
    return DayOutcome(state=state, record=record, transactions=transactions)


def _record(stage: str, row: np.ndarray) -> IndicatorRecord:
    return IndicatorRecord(stage=stage, **dict(zip(DAILY_COLUMNS, map(float, row))))


def _mean_records(per_replication: List[List[IndicatorRecord]]) -> List[IndicatorRecord]:
    values = np.array(
        [[[r.value(c) for c in DAILY_COLUMNS] for r in records] for records in per_replication]
    )
    return [
        _record(str(day), row) for day, row in enumerate(values.mean(axis=0), start=1)
    ]


def _summarize(daily: List[IndicatorRecord]) -> IndicatorRecord:
    means = np.array([[r.value(c) for c in DAILY_COLUMNS] for r in daily]).mean(axis=0)
    return _record("mean", means)


def _mean_interval(order_days: List[int]) -> Optional[float]:
    if len(order_days) < 2:
        return None
    return float(np.mean(np.diff(order_days)))


def simulate_policy(
    scenario: Scenario,
    policy: PolicyKind,
    demand_factor: float = 1.0,
    lead_offset: int = 0,
    replications: Optional[int] = None,
    decisions: Optional[DecisionOutcome] = None,
) -> PolicyRun:
    """
    Run one policy over all replications and aggregate the metrics.

    Raises:
        SimulationError: if a ledger fails verification or a committed
            reorder is missing from it.
    """
    replications = scenario.replications if replications is None else replications
    stats_per_run: List[RetailerStats] = []
    records_per_run: List[List[IndicatorRecord]] = []
    chains: List[LedgerChain] = []

    for replication in range(replications):
        state = initial_state(scenario, policy, replication, demand_factor, lead_offset)
        records = []
        for day in range(1, scenario.horizon_days + 1):
            outcome = step_day(state, day, policy, scenario)
            state = outcome.state
            records.append(outcome.record.indicators)
        stats_per_run.append(state.stats)
        records_per_run.append(records)

        if state.ledger is not None:
            report = verify_chain(state.ledger)
            if not report.ok:
                raise SimulationError(f"Replication {replication}: ledger {report}.")
            sealed = sum(1 for _ in state.ledger.events(EventKind.REORDER))
            if sealed != len(state.stats.order_quantities):
                raise SimulationError(
                    f"Replication {replication}: {sealed} sealed reorders for "
                    f"{len(state.stats.order_quantities)} committed."
                )
            chains.append(state.ledger)

    delivery = [m for s in stats_per_run for m in s.delivery_minutes]
    quantities = [q for s in stats_per_run for q in s.order_quantities]
    intervals = [
        i for i in (_mean_interval(s.order_days) for s in stats_per_run) if i is not None
    ]
    if not delivery:
        logger.warning(f"No delivery reached the retailer under the {policy.value} policy.")
    if not intervals:
        logger.warning(f"Fewer than two reorders per run under the {policy.value} policy.")

    demand = sum(s.demand for s in stats_per_run)
    served = sum(s.served for s in stats_per_run)
    arrivals = sum(s.arrivals for s in stats_per_run)
    days = sum(s.days for s in stats_per_run)
    fill = _ratio(served, demand, 1.0)
    kpis = (
        fill,
        _ratio(sum(s.on_time for s in stats_per_run), arrivals, 1.0),
        1.0 - _ratio(sum(s.stockout_days for s in stats_per_run), days, 0.0),
    )
    scores = efficiency_scores(kpis)
    daily = _mean_records(records_per_run)
    summary = _summarize(daily)

    avg_quantity = float(np.mean(quantities)) if quantities else 0.0
    supplier_profit = retailer_profit = 0.0
    if decisions is not None:
        params = scenario.economics.params
        q0 = avg_quantity if avg_quantity > 0 else scenario.economics.bounds.q[0]
        supplier_profit = float(profit_supplier(params, q0, decisions.a))
        retailer_profit = float(profit_retailer(params, decisions.p, q0, decisions.a))

    metrics = SimulationMetrics(
        policy=policy,
        avg_delivery_time_minutes=(
            float(np.mean(delivery))
            if delivery
            else scenario.logistics.base_delivery_minutes
        ),
        avg_reorder_interval_days=(
            float(np.mean(intervals)) if intervals else float(scenario.horizon_days)
        ),
        avg_order_quantity=avg_quantity,
        daily=daily,
        summary=summary,
        kpis=kpis,
        efficiency_scores=scores,
        efficiency=classify_efficiency(scores),
        fill_rate=fill,
        lost_sales=float(np.mean([s.lost for s in stats_per_run])),
        reorder_count=float(np.mean([len(s.order_quantities) for s in stats_per_run])),
        supplier_profit=supplier_profit,
        retailer_profit=retailer_profit,
    )
    logger.info(
        f"{policy.value}: delivery {metrics.avg_delivery_time_minutes:.4g} min, "
        f"reorder interval {metrics.avg_reorder_interval_days:.4g} days, "
        f"order quantity {metrics.avg_order_quantity:.4g}."
    )
    return PolicyRun(
        metrics=metrics,
        demand_logs=[s.demand_log for s in stats_per_run],
        committed_reorders=[len(s.order_quantities) for s in stats_per_run],
        chains=chains,
    )


def perturbation_states(scenario: Scenario) -> List[Tuple[float, int]]:
    """The non-base (demand factor, lead offset) combinations, in sweep order."""
    return [
        (factor, offset)
        for factor in scenario.perturbations.demand_factors
        for offset in scenario.perturbations.lead_offsets
        if not (factor == 1.0 and offset == 0)
    ]


def run_state_sweep(scenario: Scenario) -> List[StateVector]:
    states = []
    for index, (factor, offset) in enumerate(perturbation_states(scenario), start=1):
        run = simulate_policy(
            scenario,
            PolicyKind.ANFIS,
            demand_factor=factor,
            lead_offset=offset,
            replications=scenario.perturbations.replications,
        )
        states.append(
            StateVector(
                name=f"Z{index}",
                demand_factor=factor,
                lead_offset=offset,
                scores=run.metrics.efficiency_scores,
                efficiency=run.metrics.efficiency,
            )
        )
    return states


def run_simulation(scenario: Scenario) -> SimulationResult:
    """
    Run both policies on the same demand streams, the perturbed states and
    the decision search.

    Returns:
        Metrics per policy, the ledger of the first ANFIS replication, the
        state vectors and the economic decisions.
    """
    logger.info(
        f"Simulating {scenario.replications} replication(s) of "
        f"{scenario.horizon_days} days (seed {scenario.seed})..."
    )
    decisions = optimize_decisions(scenario.economics.params, scenario.economics.bounds)
    runs = {
        policy: simulate_policy(scenario, policy, decisions=decisions)
        for policy in PolicyKind
    }
    if runs[PolicyKind.BASELINE].demand_logs != runs[PolicyKind.ANFIS].demand_logs:
        raise SimulationError("The policies did not see the same demand streams.")
    states = run_state_sweep(scenario)
    logger.info("Simulation... Done.")
    return SimulationResult(
        metrics={policy: run.metrics for policy, run in runs.items()},
        chain=runs[PolicyKind.ANFIS].chains[0],
        states=states,
        decisions=decisions,
        demand_logs={policy: run.demand_logs for policy, run in runs.items()},
    )
