"""
Supply-chain indicator tables (quality, logistics, delivery, stock levels).
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np
import pandas as pd
from rxn.utilities.files import PathLike

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

DATA_DIR = Path(__file__).parent / "data"
REFERENCE_INDICATORS = DATA_DIR / "stage_indicators.csv"
REFERENCE_OUTPUTS = DATA_DIR / "stage_outputs.csv"

INDICATOR_COLUMNS = (
    "quality_p1",
    "material_p2",
    "logistic_p3",
    "purchase_p4",
    "order_plan_l1",
    "order_speed_l2",
    "delivery_c1",
    "volume_c2",
    "node_satisfaction_c4",
    "outbound_error_s1",
    "damage_s2",
    "turnover_s3",
    "zero_inventory",
)
OPTIONAL_COLUMNS = ("delivery_error_c3",)
HEADER = ("stage",) + INDICATOR_COLUMNS
KNOWN_COLUMNS = INDICATOR_COLUMNS + OPTIONAL_COLUMNS

PERCENT_COLUMNS = frozenset(
    [
        "quality_p1",
        "material_p2",
        "logistic_p3",
        "purchase_p4",
        "order_plan_l1",
        "delivery_c1",
        "volume_c2",
        "outbound_error_s1",
        "damage_s2",
        "delivery_error_c3",
    ]
)

# Row order of the indicator report.
REPORT_ORDER = (
    "quality_p1",
    "material_p2",
    "logistic_p3",
    "purchase_p4",
    "order_plan_l1",
    "order_speed_l2",
    "delivery_c1",
    "volume_c2",
    "delivery_error_c3",
    "node_satisfaction_c4",
    "outbound_error_s1",
    "damage_s2",
    "turnover_s3",
    "zero_inventory",
)

# Default ANFIS arity: eight inputs, the stage outputs that follow.
DEFAULT_INPUTS = INDICATOR_COLUMNS[:8]
DEFAULT_OUTPUTS = (
    "node_satisfaction_c4",
    "outbound_error_s1",
    "damage_s2",
    "turnover_s3",
    "zero_inventory",
    "delivery_error_c3",
)


class DatasetFormatError(ValueError):
    def __init__(self, line: int, column: Optional[str], message: str):
        location = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{location}: {message}")
        self.line = line
        self.column = column


class IndicatorLookupError(ValueError):
    """Raised for an unknown indicator name or a value a record does not provide."""

    def __init__(self, name: str, message: str):
        super().__init__(message)
        self.name = name


def check_column_names(names: Sequence[str]) -> None:
    """
    Raises:
        IndicatorLookupError: for the first name that is not an indicator column.
    """
    for name in names:
        if name not in KNOWN_COLUMNS:
            raise IndicatorLookupError(
                name,
                f'Unknown indicator column "{name}"; expected one of '
                f'{", ".join(KNOWN_COLUMNS)}.',
            )


@attr.s(auto_attribs=True, frozen=True)
class IndicatorRecord:
    """
    Indicators of one stage (or one simulated day).

    Percentages are in [-100, 100]; order_speed_l2 is in days.
    """

    stage: str
    quality_p1: float
    material_p2: float
    logistic_p3: float
    purchase_p4: float
    order_plan_l1: float
    order_speed_l2: float
    delivery_c1: float
    volume_c2: float
    node_satisfaction_c4: float
    outbound_error_s1: float
    damage_s2: float
    turnover_s3: float
    zero_inventory: float
    delivery_error_c3: Optional[float] = None

    def value(self, name: str) -> float:
        check_column_names([name])
        value = getattr(self, name)
        if value is None:
            raise IndicatorLookupError(
                name, f"Indicator {name} is not available for stage {self.stage}."
            )
        return float(value)

    def as_vector(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.value(n) for n in names])


def _check_value(name: str, value: float, line: int) -> None:
    if not np.isfinite(value):
        raise DatasetFormatError(line, name, f"non-finite value {value}")
    if name in PERCENT_COLUMNS and not -100 <= value <= 100:
        raise DatasetFormatError(line, name, f"percentage {value} outside [-100, 100]")
    if name == "order_speed_l2" and not value > 0:
        raise DatasetFormatError(line, name, f"order speed must be > 0 days, got {value}")


def load_dataset(path: PathLike) -> List[IndicatorRecord]:
    """
    Read an indicator CSV, one record per stage row.

    Args:
        path: CSV with the header ``stage,quality_p1,...,zero_inventory`` and
            an optional ``delivery_error_c3`` column.

    Raises:
        DatasetFormatError: naming the line and column of the first problem.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError(1, None, "empty file") from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else 1
        raise DatasetFormatError(line, None, "wrong number of fields") from e

    columns = [c.strip() for c in frame.columns]
    for name in HEADER:
        if name not in columns:
            raise DatasetFormatError(1, name, "missing column")
    unknown = [c for c in columns if c not in HEADER and c not in OPTIONAL_COLUMNS]
    if unknown:
        raise DatasetFormatError(1, unknown[0], "unknown column")
    frame.columns = columns
    if frame.empty:
        raise DatasetFormatError(2, None, "no data rows")

    numeric = [c for c in columns if c != "stage"]
    records = []
    for row_index, row in enumerate(frame.to_dict("records")):
        line = row_index + 2
        values = {}
        for name in numeric:
            cell = str(row[name]).strip()
            try:
                values[name] = float(cell)
            except ValueError as e:
                raise DatasetFormatError(line, name, f'non-numeric cell "{cell}"') from e
            _check_value(name, values[name], line)
        records.append(IndicatorRecord(stage=str(row["stage"]).strip(), **values))
    logger.info(f'Loaded {len(records)} indicator records from "{path}".')
    return records


def load_reference_dataset() -> List[IndicatorRecord]:
    """The packaged 30-day indicator table, stages 1 to 9."""
    return load_dataset(REFERENCE_INDICATORS)


def load_reference_outputs() -> List[IndicatorRecord]:
    """The packaged output indicators, stages 1 to 6, with delivery errors."""
    return load_dataset(REFERENCE_OUTPUTS)


def pair_by_stage(
    inputs: Sequence[IndicatorRecord], outputs: Sequence[IndicatorRecord]
) -> Tuple[List[IndicatorRecord], List[IndicatorRecord]]:
    """
    Match input and output records on their stage.

    Input stages without an output record are dropped; the input order is kept.

    Returns:
        Tuple with the matched input records and their output records.
    """
    by_stage: Dict[str, IndicatorRecord] = {}
    for record in outputs:
        if record.stage in by_stage:
            raise ValueError(f"Stage {record.stage} appears twice in the output records.")
        by_stage[record.stage] = record

    matched = [(r, by_stage[r.stage]) for r in inputs if r.stage in by_stage]
    if not matched:
        raise ValueError("The input and output records share no stage.")
    if len(matched) < len(inputs):
        logger.info(f"{len(inputs) - len(matched)} input stage(s) have no output record.")
    return [i for i, _ in matched], [o for _, o in matched]


def load_reference_pairs() -> Tuple[List[IndicatorRecord], List[IndicatorRecord]]:
    """Packaged input indicators paired by stage with the packaged outputs."""
    return pair_by_stage(load_reference_dataset(), load_reference_outputs())


def records_to_frame(records: Sequence[IndicatorRecord]) -> pd.DataFrame:
    rows = [attr.asdict(r) for r in records]
    frame = pd.DataFrame(rows, columns=list(HEADER) + list(OPTIONAL_COLUMNS))
    if frame["delivery_error_c3"].isna().all():
        frame = frame.drop(columns=list(OPTIONAL_COLUMNS))
    return frame


def dump_dataset(records: Sequence[IndicatorRecord], path: PathLike) -> None:
    """Write records in the indicator CSV schema, 17 significant digits."""
    records_to_frame(records).to_csv(path, index=False, float_format="%.17g")


def available_columns(records: Sequence[IndicatorRecord], names: Sequence[str]) -> List[str]:
    """The given indicator names that every record provides."""
    check_column_names(names)
    return [n for n in names if all(getattr(r, n) is not None for r in records)]


def to_matrix(records: Sequence[IndicatorRecord], names: Sequence[str]) -> np.ndarray:
    check_column_names(names)
    return np.array([r.as_vector(names) for r in records])
