"""
Machine-readable metrics and the human report of a simulation run.

The metrics file is a long-format CSV (``section,key,policy,value``) with 17
significant digits; the Markdown report is rendered from that file alone,
with 4 significant digits.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import attr
import pandas as pd
from rxn.utilities.files import PathLike, dump_list_to_file, get_file_size_as_string

from .efficiency import EfficiencyClass
from .indicators import REPORT_ORDER, IndicatorRecord, dump_dataset
from .ledger_io import dump_chain
from .simulator import PolicyKind, SimulationResult

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

METRICS_COLUMNS = ("section", "key", "policy", "value")
ALL_POLICIES = "all"

METRICS_FILE = "metrics.csv"
INDICATORS_FILE = "indicators.csv"
CHAIN_FILE = "chain.jsonl"
REPORT_FILE = "report.md"

COMPARISON_KEYS = (
    "avg_delivery_time_minutes",
    "avg_reorder_interval_days",
    "avg_order_quantity",
    "fill_rate",
    "lost_sales",
    "reorder_count",
    "supplier_profit",
    "retailer_profit",
)
KPI_KEYS = ("kpi_fill_rate", "kpi_on_time", "kpi_in_stock")
ECONOMICS_KEYS = ("p", "q", "a", "supplier_profit", "retailer_profit", "coarse_retailer_profit")

Row = Tuple[str, str, str, float]


class MetricsFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _class_key(label: EfficiencyClass) -> str:
    return label.value.lower()


def metrics_rows(result: SimulationResult) -> List[Row]:
    rows: List[Row] = []
    for policy, metrics in result.metrics.items():
        for name in REPORT_ORDER:
            rows.append(("indicators", name, policy.value, metrics.summary.value(name)))
    for policy, metrics in result.metrics.items():
        for key, kpi in zip(KPI_KEYS, metrics.kpis):
            rows.append(("efficiency", key, policy.value, float(kpi)))
        for label, score in zip(EfficiencyClass, metrics.efficiency_scores):
            rows.append(("efficiency", f"score_{_class_key(label)}", policy.value, float(score)))
        for label, bit in zip(EfficiencyClass, metrics.efficiency.one_hot):
            rows.append(("efficiency", f"one_hot_{_class_key(label)}", policy.value, float(bit)))
    for key in COMPARISON_KEYS:
        for policy, metrics in result.metrics.items():
            rows.append(("comparison", key, policy.value, float(getattr(metrics, key))))
    for state in result.states:
        policy = PolicyKind.ANFIS.value
        rows.append(("states", f"{state.name}.demand_factor", policy, state.demand_factor))
        rows.append(("states", f"{state.name}.lead_offset", policy, float(state.lead_offset)))
        for label, score in zip(EfficiencyClass, state.scores):
            rows.append(("states", f"{state.name}.{_class_key(label)}", policy, float(score)))
    for key in ECONOMICS_KEYS:
        rows.append(("economics", key, ALL_POLICIES, float(getattr(result.decisions, key))))
    return rows


def metrics_frame(result: SimulationResult) -> pd.DataFrame:
    return pd.DataFrame(metrics_rows(result), columns=list(METRICS_COLUMNS))


def write_metrics(frame: pd.DataFrame, path: PathLike) -> None:
    """Write the long-format metrics, values with 17 significant digits."""
    out = frame.copy()
    out["value"] = [format(float(v), ".17g") for v in out["value"]]
    out.to_csv(path, index=False, lineterminator="\n")


def load_metrics(path: PathLike) -> pd.DataFrame:
    """
    Read a metrics file written by ``write_metrics``.

    Raises:
        MetricsFormatError: for a wrong header or a non-numeric value.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise MetricsFormatError(1, "empty file") from e
    except pd.errors.ParserError as e:
        raise MetricsFormatError(1, f"malformed CSV: {e}") from e
    if tuple(frame.columns) != METRICS_COLUMNS:
        raise MetricsFormatError(1, f"expected header {','.join(METRICS_COLUMNS)}")
    values = []
    for index, cell in enumerate(frame["value"]):
        try:
            values.append(float(cell))
        except ValueError as e:
            raise MetricsFormatError(index + 2, f'non-numeric value "{cell}"') from e
    frame["value"] = values
    return frame


def _fmt(value: float) -> str:
    return format(value, ".4g")


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return lines + [""]


def _section(frame: pd.DataFrame, section: str) -> Dict[Tuple[str, str], float]:
    part = frame[frame["section"] == section]
    return {(k, p): float(v) for k, p, v in zip(part["key"], part["policy"], part["value"])}


def _label(values: Dict[Tuple[str, str], float], prefix: str, policy: str) -> str:
    for label in EfficiencyClass:
        if values.get((f"{prefix}{_class_key(label)}", policy)) == 1.0:
            return label.value
    return "-"


def render_report(frame: pd.DataFrame) -> str:
    """Markdown tables of the indicators, efficiency, comparison, states and economics."""
    policies = [p.value for p in PolicyKind if p.value in set(frame["policy"])]
    lines = ["# Simulation report", ""]

    indicators = _section(frame, "indicators")
    lines += ["## Indicators (horizon means)", ""]
    lines += _table(
        ["indicator"] + policies,
        [
            [name] + [_fmt(indicators[(name, p)]) for p in policies]
            for name in REPORT_ORDER
            if all((name, p) in indicators for p in policies)
        ],
    )

    efficiency = _section(frame, "efficiency")
    keys = list(KPI_KEYS) + [f"score_{_class_key(c)}" for c in EfficiencyClass]
    lines += ["## Efficiency", ""]
    rows = [
        [key] + [_fmt(efficiency[(key, p)]) for p in policies]
        for key in keys
        if all((key, p) in efficiency for p in policies)
    ]
    rows.append(["assessment"] + [_label(efficiency, "one_hot_", p) for p in policies])
    lines += _table(["metric"] + policies, rows)

    comparison = _section(frame, "comparison")
    lines += ["## Policy comparison", ""]
    lines += _table(
        ["metric"] + policies,
        [
            [key] + [_fmt(comparison[(key, p)]) for p in policies]
            for key in COMPARISON_KEYS
            if all((key, p) in comparison for p in policies)
        ],
    )

    states = _section(frame, "states")
    names = sorted(
        {k.split(".")[0] for k, _ in states}, key=lambda name: int(name.lstrip("Z"))
    )
    if names:
        policy = PolicyKind.ANFIS.value
        lines += ["## Scenario states", ""]
        lines += _table(
            ["state", "demand factor", "lead offset"] + [c.value for c in EfficiencyClass],
            [
                [
                    name,
                    _fmt(states[(f"{name}.demand_factor", policy)]),
                    _fmt(states[(f"{name}.lead_offset", policy)]),
                ]
                + [_fmt(states[(f"{name}.{_class_key(c)}", policy)]) for c in EfficiencyClass]
                for name in names
            ],
        )

    economics = _section(frame, "economics")
    if economics:
        lines += ["## Decisions", ""]
        lines += _table(
            ["decision", "value"],
            [
                [k, _fmt(economics[(k, ALL_POLICIES)])]
                for k in ECONOMICS_KEYS
                if (k, ALL_POLICIES) in economics
            ],
        )
    return "\n".join(lines)


def write_report(frame: pd.DataFrame, path: PathLike) -> None:
    dump_list_to_file(render_report(frame).splitlines(), path)


def daily_records(result: SimulationResult) -> List[IndicatorRecord]:
    """The averaged daily series of both policies, stages named ``policy:day``."""
    return [
        attr.evolve(record, stage=f"{policy.value}:{record.stage}")
        for policy, metrics in result.metrics.items()
        for record in metrics.daily
    ]


def write_outputs(result: SimulationResult, output_dir: PathLike) -> List[Path]:
    """
    Write the metrics, the daily indicators, the ledger and the report.

    Returns:
        The paths of the written files.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        output_dir / name
        for name in (METRICS_FILE, INDICATORS_FILE, CHAIN_FILE, REPORT_FILE)
    ]
    metrics_path, indicators_path, chain_path, report_path = paths

    frame = metrics_frame(result)
    write_metrics(frame, metrics_path)
    dump_dataset(daily_records(result), indicators_path)
    dump_chain(result.chain, chain_path)
    write_report(load_metrics(metrics_path), report_path)
    logger.info(
        f'Metrics written to "{metrics_path}" (size: {get_file_size_as_string(metrics_path)}).'
    )
    return paths
