"""
Command line for running scenario files.

    python cli.py --scenario scenarios/four_device.json --seed 99 --output out.csv
"""

import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

import settings
from mimo.errors import ConfigError, MimoError, SimulationError
from model import MetricsRecord
from scenario import (
    ChannelRecorder,
    build_network,
    emit_results,
    load_scenario,
    pattern_to_csv,
    run_monte_carlo,
)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)
app = typer.Typer(add_completion=False)
stderr = Console(stderr=True)


def summary_table(records: List[MetricsRecord]) -> Table:
    """Mean mutual information per pair and sweep value."""
    totals = defaultdict(list)
    for record in records:
        totals[(record.sweep_value, record.pair)].append(record.mutual_information)
    table = Table(title="Mean mutual information")
    table.add_column("sweep value", justify="right")
    table.add_column("pair")
    table.add_column("trials", justify="right")
    table.add_column("MI [bps/Hz]", justify="right")
    for (sweep_value, pair), values in totals.items():
        table.add_row(
            "-" if sweep_value is None else f"{sweep_value:g}",
            pair,
            str(len(values)),
            f"{sum(values) / len(values):.4f}",
        )
    return table


def write_pattern(config, device_name: str, cut: str, destination: Path):
    network = build_network(config)
    if not network.has_device(device_name):
        raise ConfigError(f"--pattern-cut: unknown device '{device_name}'")
    device = network.get_device(device_name)
    side = device.transmitter or device.receiver
    points = side.array.pattern_cut(cut, settings.PATTERN_SAMPLES)
    try:
        destination.write_text(pattern_to_csv(points))
    except OSError as e:
        raise SimulationError(f"Cannot write pattern to {destination}: {e}") from e
    logger.info("Wrote %s cut of %s to %s", cut, device_name, destination)


@app.command()
def run(
    scenario: Path = typer.Option(..., "--scenario", help="Scenario JSON file"),
    trials: Optional[int] = typer.Option(None, "--trials", min=0, help="Overrides run.trials"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Overrides run.master_seed"),
    output: Optional[Path] = typer.Option(None, "--output", help="Results file; stdout when omitted"),
    fmt: str = typer.Option("csv", "--format", help="csv or json"),
    emit_channels: Optional[Path] = typer.Option(
        None, "--emit-channels", help="Dump every channel realization as CSV"
    ),
    pattern_cut: Optional[str] = typer.Option(
        None, "--pattern-cut", help="Device whose array pattern is written"
    ),
    pattern_output: Path = typer.Option(Path("pattern.csv"), "--pattern-output"),
    cut: str = typer.Option("azimuth", "--cut", help="azimuth or elevation"),
    log_level: Optional[str] = typer.Option(None, "--log-level"),
):
    """Runs a Monte-Carlo scenario and writes per-trial, per-pair metrics."""
    settings.configure_logging(log_level)
    try:
        config = load_scenario(scenario)
        if fmt not in ("csv", "json"):
            raise ConfigError(f"Unknown output format '{fmt}', expected csv or json")
        if pattern_cut is not None:
            write_pattern(config, pattern_cut, cut, pattern_output)
        recorder = ChannelRecorder() if emit_channels is not None else None
        records = run_monte_carlo(config, trials=trials, seed=seed, channel_sink=recorder)
        payload = emit_results(records, fmt, output)
        if output is None:
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
        if recorder is not None:
            recorder.write(emit_channels)
    except ConfigError as e:
        stderr.print(f"[red]configuration error:[/red] {e}")
        raise typer.Exit(EXIT_CONFIG)
    except MimoError as e:
        stderr.print(f"[red]simulation error:[/red] {e}")
        raise typer.Exit(EXIT_RUNTIME)
    if records:
        stderr.print(summary_table(records))


if __name__ == "__main__":
    app()
