import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import attr
import click
import pandas as pd
from rxn.utilities.files import iterate_lines_from_file
from rxn.utilities.logging import setup_console_logger

from ..anfis import FeatureScaler, LabeledDataset, MembershipKind, rmse
from ..anfis_training import TrainingConfig, fit_model, select_cluster_count
from ..fcm import FcmConfig, run_fcm
from ..forecast import (
    DEFAULT_ALPHA,
    SBA_VARIANT_ALIASES,
    SbaVariant,
    croston_forecast_series,
)
from ..indicators import (
    DEFAULT_INPUTS,
    DEFAULT_OUTPUTS,
    IndicatorRecord,
    available_columns,
    check_column_names,
    load_dataset,
    load_reference_dataset,
    load_reference_outputs,
    load_reference_pairs,
    pair_by_stage,
    to_matrix,
)
from ..ledger import verify_chain
from ..ledger_io import load_chain
from ..model_io import ModelBundle, save_model, write_membership_curves
from ..report import load_metrics, render_report, write_outputs
from ..scenario import resolve_scenario
from ..simulator import PolicyKind, SimulationError, run_simulation
from ..torch_utils import set_num_threads

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SEED_ENVVAR = "CHAINFIS_SEED"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@attr.s(auto_attribs=True, frozen=True)
class CommandResult:
    exit_code: int
    report_paths: List[Path] = attr.Factory(list)
    summary: str = ""


def _load_records(data: str) -> List[IndicatorRecord]:
    if data == "reference":
        return load_reference_dataset()
    return load_dataset(data)


def _names(value: str) -> List[str]:
    return [n.strip() for n in value.split(",") if n.strip()]


def _seed_option(default: Optional[int]):
    return click.option(
        "--seed",
        type=int,
        default=default,
        envvar=SEED_ENVVAR,
        show_envvar=True,
        help="Random seed; overrides the environment variable.",
    )


@click.group()
def cli() -> None:
    """Neuro-fuzzy supply-chain decisions on a simulated multi-signature ledger."""


@cli.command()
@click.option("--data", "-d", default="reference", help='Indicator CSV, or "reference".')
@click.option("--clusters", "-c", type=int, required=True, help="Number of clusters.")
@click.option(
    "--columns",
    default=",".join(DEFAULT_INPUTS),
    show_default=True,
    help="Comma-separated indicator columns to cluster on.",
)
@click.option("--fuzzifier", "-m", type=float, default=2.0, show_default=True)
@_seed_option(0)
@click.option(
    "--output-dir",
    "-o",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Where to write centers.csv and memberships.csv.",
)
def cluster(
    data: str, clusters: int, columns: str, fuzzifier: float, seed: int, output_dir: Path
) -> CommandResult:
    """Fuzzy C-means clustering of min-max scaled indicator rows."""
    records = _load_records(data)
    names = _names(columns)
    values = FeatureScaler.fit(to_matrix(records, names)).transform(
        to_matrix(records, names)
    )
    cluster_set, memberships, trace = run_fcm(
        values, clusters, FcmConfig(fuzzifier=fuzzifier, seed=seed)
    )

    output_dir.mkdir(parents=True, exist_ok=True)
    centers_path = output_dir / "centers.csv"
    memberships_path = output_dir / "memberships.csv"
    centers = pd.DataFrame(cluster_set.centers, columns=names)
    centers.insert(0, "cluster", range(1, clusters + 1))
    centers.to_csv(centers_path, index=False, float_format="%.17g", lineterminator="\n")
    table = pd.DataFrame(
        memberships.values.T, columns=[f"u_{i}" for i in range(1, clusters + 1)]
    )
    table.insert(0, "label", memberships.hard_labels() + 1)
    table.insert(0, "stage", [r.stage for r in records])
    table.to_csv(memberships_path, index=False, float_format="%.17g", lineterminator="\n")

    summary = (
        f"{clusters} clusters over {len(records)} records: objective {trace[-1]:.4g}, "
        f"partition coefficient {memberships.partition_coefficient():.4g}, "
        f"{len(trace)} iterations"
    )
    return CommandResult(EXIT_OK, [centers_path, memberships_path], summary)


def _load_training_records(
    data: str, targets: Optional[str]
) -> Tuple[List[IndicatorRecord], List[IndicatorRecord]]:
    """Input records and their output records, matched by stage."""
    if targets is None:
        if data != "reference":
            records = load_dataset(data)
            return records, records
        return load_reference_pairs()
    outputs = load_reference_outputs() if targets == "reference" else load_dataset(targets)
    return pair_by_stage(_load_records(data), outputs)


@cli.command()
@click.option("--data", "-d", default="reference", help='Indicator CSV, or "reference".')
@click.option(
    "--targets",
    "-t",
    default=None,
    help=(
        'Output indicator CSV matched to --data by stage, or "reference". Defaults to '
        "the packaged output table for the reference data and to --data otherwise."
    ),
)
@click.option("--inputs", default=",".join(DEFAULT_INPUTS), show_default=True)
@click.option("--outputs", default=",".join(DEFAULT_OUTPUTS), show_default=True)
@click.option(
    "--clusters",
    "-c",
    type=int,
    default=None,
    help="Number of rules; chosen by held-out RMSE when omitted.",
)
@click.option("--c-max", type=int, default=4, show_default=True)
@click.option(
    "--mf",
    type=click.Choice([k.value for k in MembershipKind]),
    default=MembershipKind.GAUSSIAN.value,
    show_default=True,
)
@click.option("--epochs", type=int, default=TrainingConfig().max_epochs, show_default=True)
@click.option(
    "--learning-rate", type=float, default=TrainingConfig().learning_rate, show_default=True
)
@click.option("--threads", type=int, default=1, show_default=True)
@_seed_option(0)
@click.option(
    "--model-out",
    "-o",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="The output model file (*.json)",
)
@click.option(
    "--curves",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Optional CSV with the sampled membership curves of the trained model.",
)
@click.option(
    "--mf-samples",
    type=int,
    default=TrainingConfig().mf_sample_count,
    show_default=True,
    help="Points per membership curve in --curves.",
)
def train(
    data: str,
    targets: Optional[str],
    inputs: str,
    outputs: str,
    clusters: Optional[int],
    c_max: int,
    mf: str,
    epochs: int,
    learning_rate: float,
    threads: int,
    seed: int,
    model_out: Path,
    curves: Optional[Path],
    mf_samples: int,
) -> CommandResult:
    """Build and train an ANFIS model on indicator records."""
    set_num_threads(threads)
    input_records, output_records = _load_training_records(data, targets)
    input_names = _names(inputs)
    check_column_names(input_names)
    requested = _names(outputs)
    output_names = available_columns(output_records, requested)
    for name in requested:
        if name not in output_names:
            logger.warning(f"Output {name} is missing from the data; skipped.")
    if not output_names:
        raise ValueError("None of the requested outputs is present in the data.")

    raw_inputs = to_matrix(input_records, input_names)
    scaler = FeatureScaler.fit(raw_inputs)
    dataset = LabeledDataset(
        scaler.transform(raw_inputs), to_matrix(output_records, output_names)
    )
    config = TrainingConfig(
        learning_rate=learning_rate,
        max_epochs=epochs,
        seed=seed,
        mf_sample_count=mf_samples,
    )
    if clusters is None:
        clusters = select_cluster_count(dataset, c_max, config)

    train_set, test_set = dataset.split(config.test_fraction, config.seed)
    model, history = fit_model(train_set, test_set, clusters, config, MembershipKind(mf))
    bundle = ModelBundle(model, input_names, output_names, scaler)
    save_model(bundle, model_out)
    paths = [model_out]
    if curves is not None:
        write_membership_curves(bundle, curves, config.mf_sample_count)
        paths.append(curves)

    summary = (
        f"{model.rule_count} rules, {history.epochs} epochs ({history.stop_reason}): "
        f"train RMSE {rmse(model, train_set):.4g}, test RMSE {rmse(model, test_set):.4g}"
    )
    return CommandResult(EXIT_OK, paths, summary)


def _read_demands(path: Path) -> List[float]:
    demands = []
    for line_number, line in enumerate(iterate_lines_from_file(path), 1):
        try:
            value = float(line)
        except ValueError as e:
            raise ValueError(f'"{path}", line {line_number}: not a number: "{line}"') from e
        if not math.isfinite(value) or value < 0:
            raise ValueError(
                f'"{path}", line {line_number}: demand must be a finite number >= 0, '
                f'got "{line}"'
            )
        demands.append(value)
    if not demands:
        raise ValueError(f'"{path}" holds no demand.')
    return demands


@cli.command()
@click.option(
    "--demand",
    "-d",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Demand series, one value per line.",
)
@click.option("--alpha", type=float, default=DEFAULT_ALPHA, show_default=True)
@click.option(
    "--variant",
    type=click.Choice([v.value for v in SbaVariant] + sorted(SBA_VARIANT_ALIASES)),
    default=SbaVariant.SHIFTED.value,
    show_default=True,
)
@click.option(
    "--output",
    "-o",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Where to write the forecast CSV.",
)
def forecast(demand: Path, alpha: float, variant: str, output: Path) -> CommandResult:
    """Croston estimates and the per-period forecast of a demand series."""
    demands = _read_demands(demand)
    states, forecasts = croston_forecast_series(demands, alpha, SbaVariant(variant))
    frame = pd.DataFrame(
        {
            "period": range(1, len(demands) + 1),
            "demand": demands,
            "size_estimate": [s.size_estimate for s in states],
            "interval_estimate": [s.interval_estimate for s in states],
            "forecast": forecasts,
        }
    )
    frame.to_csv(output, index=False, float_format="%.17g", lineterminator="\n")
    return CommandResult(
        EXIT_OK, [output], f"Forecast for period {len(demands) + 1}: {forecasts[-1]:.4g}"
    )


@cli.command()
@click.option(
    "--scenario", "-s", default="reference", help='Scenario JSON file, or "reference".'
)
@_seed_option(None)
@click.option("--replications", type=int, default=None, help="Overrides the scenario.")
@click.option(
    "--output-dir",
    "-o",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
)
def simulate(
    scenario: str, seed: Optional[int], replications: Optional[int], output_dir: Path
) -> CommandResult:
    """Run both reorder policies and write metrics, indicators, ledger and report."""
    config = resolve_scenario(scenario)
    if seed is not None:
        config = config.with_seed(seed)
    if replications is not None:
        config = attr.evolve(config, replications=replications)
    result = run_simulation(config)
    paths = write_outputs(result, output_dir)

    lines = []
    for policy in PolicyKind:
        metrics = result.metrics[policy]
        lines.append(
            f"{policy.value}: delivery {metrics.avg_delivery_time_minutes:.4g} min, "
            f"reorder every {metrics.avg_reorder_interval_days:.4g} days, "
            f"{metrics.avg_order_quantity:.4g} units per order, "
            f"{metrics.efficiency.label.value}"
        )
    return CommandResult(EXIT_OK, paths, "\n".join(lines))


@cli.group("ledger")
def ledger_group() -> None:
    """Ledger commands."""


@ledger_group.command()
@click.argument("chain_file", type=click.Path(dir_okay=False, path_type=Path))
def verify(chain_file: Path) -> CommandResult:
    """Verify the hashes and signatures of a JSON-lines chain."""
    report = verify_chain(load_chain(chain_file))
    return CommandResult(EXIT_OK if report.ok else EXIT_FAILURE, [], str(report))


@cli.command()
@click.argument("metrics_file", type=click.Path(dir_okay=False, path_type=Path))
@click.option(
    "--output",
    "-o",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Markdown file to write; printed when omitted.",
)
def report(metrics_file: Path, output: Optional[Path]) -> CommandResult:
    """Render the tables of a metrics file written by ``simulate``."""
    text = render_report(load_metrics(metrics_file))
    if output is None:
        return CommandResult(EXIT_OK, [], text)
    output.write_text(text + "\n")
    return CommandResult(EXIT_OK, [output], f'Report written to "{output}".')


def run_command(argv: Sequence[str]) -> CommandResult:
    """
    Run one command line without exiting the interpreter.

    Exit codes: 0 on success, 1 for bad data or a failed verification, 2 for
    usage errors.
    """
    try:
        result = cli.main(args=list(argv), prog_name="chainfis", standalone_mode=False)
    except click.UsageError as e:
        usage = f"{e.ctx.get_usage()}\n" if e.ctx is not None else ""
        return CommandResult(EXIT_USAGE, [], f"{usage}Error: {e.format_message()}")
    except click.exceptions.Exit as e:
        return CommandResult(e.exit_code)
    except click.Abort:
        return CommandResult(EXIT_FAILURE, [], "Aborted.")
    except (ValueError, OSError, SimulationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return CommandResult(EXIT_FAILURE, [], f"Error: {e}")
    if isinstance(result, CommandResult):
        return result
    # --help and friends
    return CommandResult(result if isinstance(result, int) else EXIT_OK)


def main() -> None:
    setup_console_logger()
    result = run_command(sys.argv[1:])
    if result.summary:
        click.echo(result.summary, err=result.exit_code != EXIT_OK)
    sys.exit(result.exit_code)


if __name__ == "__main__":
    main()
