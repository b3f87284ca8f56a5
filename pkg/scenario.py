"""
Scenario loading, network construction and the Monte-Carlo driver.
"""

import copy
import csv
import io
import logging
import math
from pathlib import Path
from typing import Callable, Iterable, List, Optional

import orjson
from pydantic import ValidationError

import settings
from mimo.errors import ConfigError, MimoError, SimulationError
from mimo.link import Architecture, Device
from mimo.network import Network
from mimo.transmitter import subarray_mask
from mimo.units import linear_to_db
from model import DeviceConfig, MetricsRecord, ScenarioConfig

logger = logging.getLogger(__name__)

CSV_HEADER = list(MetricsRecord.model_fields)

ChannelSink = Callable[[Optional[float], int, Network], None]


def _format_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        problems.append(f"{location}: {item['msg']}" if location else item["msg"])
    return "; ".join(problems)


def parse_scenario(text: str | bytes) -> ScenarioConfig:
    """
    Parses and validates a JSON scenario.

    Raises:
        ConfigError: On malformed JSON or any schema/cross-reference problem,
            with the offending field path in the message.
    """
    try:
        data = orjson.loads(text)
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"Scenario is not valid JSON: {e}") from e
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e
    logger.info(
        "Loaded scenario with %d devices and %d pairs", len(config.devices), len(config.pairs)
    )
    return config


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"Cannot read scenario file {path}: {e}") from e
    return parse_scenario(text)


def build_device(config: DeviceConfig, num_streams: int) -> Device:
    device = Device.create(
        config.capability.value,
        config.architecture.value,
        name=config.name,
        coordinate=config.coordinate,
        marker=config.marker,
    )
    if device.transmitter is not None and config.resolved_transmit_array is not None:
        device.set_transmit_array(config.resolved_transmit_array.build())
    if device.receiver is not None and config.resolved_receive_array is not None:
        device.set_receive_array(config.resolved_receive_array.build())
    device.set_num_streams(num_streams)
    if config.architecture == Architecture.HYBRID:
        hybrid = config.hybrid
        device.set_num_rf_chains(hybrid.rf_chains)
        for side in (device.transmitter, device.receiver):
            if side is None:
                continue
            if hybrid.mask == "subarray":
                side.set_connections(subarray_mask(side.num_antennas, hybrid.rf_chains))
            side.set_phase_bits(hybrid.phase_bits)
            side.set_amplitude_bits(hybrid.amplitude_bits, hybrid.amplitude_stepping)
    return device


def build_network(config: ScenarioConfig) -> Network:
    """
    Turns a validated scenario into a populated network ready to realize.

    Raises:
        ConfigError: If the scenario is valid on its own but describes a
            network the simulator cannot build (e.g. mismatched symmetry).
    """
    settings_block = config.global_settings
    try:
        network = Network.create()
        network.set_propagation_velocity(settings_block.propagation_velocity)
        network.set_carrier_frequency(settings_block.carrier_frequency)
        network.set_channel(config.channel)
        network.set_path_loss(config.path_loss)
        for device_config in config.devices:
            network.add_device(build_device(device_config, settings_block.num_streams))
        for source, destination in config.pairs:
            network.add_source_destination(
                network.get_device(source), network.get_device(destination)
            )
        network.populate_links()
        network.set_symbol_bandwidth(settings_block.symbol_bandwidth)
        network.set_transmit_power(settings_block.transmit_power_dbm, "dBm")
        network.set_noise_power_per_hz(settings_block.noise_power_per_hz_dbm, "dBm_Hz")
        if settings_block.channel_symmetric:
            network.set_channel_symmetric(True)
        if settings_block.path_loss_symmetric:
            network.set_path_loss_symmetric(True)
    except MimoError as e:
        raise ConfigError(str(e)) from e
    return network


def _apply_sweep(network: Network, parameter: Optional[str], value: Optional[float]):
    if parameter is None:
        return
    if parameter == "snr_db":
        network.set_snr(value, unit="dB")
    elif parameter == "transmit_power_dbm":
        network.set_transmit_power(value, "dBm")


def _pair_records(network: Network, trial: int, sweep_value: Optional[float]) -> List[MetricsRecord]:
    records = []
    for source, destination in network.pairs:
        link = network.get_link(source, destination)
        absolute, normalized = network.report_symbol_estimation_error(source, destination)
        budget, _ = link.compute_link_budget()
        records.append(
            MetricsRecord(
                trial=trial,
                sweep_value=sweep_value,
                pair=link.name,
                mutual_information=network.report_mutual_information(source, destination),
                absolute_error=absolute,
                normalized_error=normalized,
                normalized_error_db=linear_to_db(normalized) if normalized > 0 else None,
                snr_db=budget.snr_db,
                transmit_power_dbm=budget.transmit_power_dbm,
                path_loss_db=budget.path_loss_db,
                received_power_dbm=budget.received_power_dbm,
                noise_power_dbm=budget.noise_power_dbm,
            )
        )
    return records


def run_monte_carlo(
    config: ScenarioConfig,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    channel_sink: Optional[ChannelSink] = None,
) -> List[MetricsRecord]:
    """
    Runs every sweep value for every trial on a fresh clone of the baseline network.

    Each trial draws links, noise and symbols from substreams keyed by the
    trial index, so trial t sees the same channels at every sweep value.

    Args:
        config (ScenarioConfig): Validated scenario.
        trials (int, optional): Overrides `config.run.trials`.
        seed (int, optional): Overrides `config.run.master_seed`.
        channel_sink (callable, optional): Called as sink(sweep_value, trial,
            network) right after each realization.

    Returns:
        list: MetricsRecords ordered by sweep value, trial, then pair.

    Raises:
        SimulationError: Any simulator failure, with sweep/trial context.
    """
    trials = config.run.trials if trials is None else trials
    if trials < 0:
        raise ConfigError(f"Trial count must be non-negative, got {trials}")
    master_seed = seed if seed is not None else config.run.master_seed
    if master_seed is None:
        master_seed = settings.DEFAULT_SEED
    sweep = config.run.sweep
    parameter = sweep.parameter if sweep else None
    values = sweep.values if sweep else [None]

    baseline = build_network(config)
    records: List[MetricsRecord] = []
    for value in values:
        logger.info("Sweep point %s=%s: %d trial(s)", parameter or "none", value, trials)
        for trial in range(trials):
            try:
                network = copy.deepcopy(baseline)
                _apply_sweep(network, parameter, value)
                network.realization(master_seed, trial)
                if channel_sink is not None:
                    channel_sink(value, trial, network)
                network.distribute_csi()
                network.configure_all(config.strategies.transmitter, config.strategies.receiver)
                network.draw_transmit_symbols(master_seed, trial)
                network.compute_received_signals(master_seed, trial)
                records.extend(_pair_records(network, trial, value))
            except MimoError as e:
                raise SimulationError(
                    f"Sweep {parameter or 'none'}={value}, trial {trial}: {e}"
                ) from e
    logger.info("Run finished with %d record(s)", len(records))
    return records


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def results_to_csv(records: Iterable[MetricsRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in records:
        writer.writerow([_format_cell(getattr(record, name)) for name in CSV_HEADER])
    return buffer.getvalue()


def results_to_json(records: Iterable[MetricsRecord]) -> bytes:
    return orjson.dumps([record.model_dump() for record in records], option=orjson.OPT_INDENT_2)


def emit_results(records: List[MetricsRecord], fmt: str = "csv", destination=None) -> bytes:
    """
    Serializes records as CSV (fixed header, 17 significant digits) or JSON.

    Writes to `destination` when given and always returns the bytes.

    Raises:
        ConfigError: Unknown format.
        SimulationError: The destination cannot be written.
    """
    if fmt == "csv":
        payload = results_to_csv(records).encode("utf-8")
    elif fmt == "json":
        payload = results_to_json(records)
    else:
        raise ConfigError(f"Unknown output format '{fmt}', expected csv or json")
    if destination is not None:
        try:
            Path(destination).write_bytes(payload)
        except OSError as e:
            raise SimulationError(f"Cannot write results to {destination}: {e}") from e
    return payload


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name == "trial":
        return int(text)
    if name == "pair":
        return text
    return float(text)


def load_results_csv(text: str) -> List[MetricsRecord]:
    """Reads CSV written by `emit_results` back into records."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ConfigError(f"Unexpected results header {header}")
    return [
        MetricsRecord(**{name: _parse_cell(name, cell) for name, cell in zip(header, row)})
        for row in reader
    ]


class ChannelRecorder:
    """
    Collects every realized channel matrix of a run for --emit-channels.

    Rows hold one matrix row each with real/imag parts interleaved.
    """

    def __init__(self):
        self.rows: List[list] = []
        self.matrices: List[tuple[Optional[float], int, str, str, object]] = []

    def __call__(self, sweep_value: Optional[float], trial: int, network: Network):
        for link in network.links.values():
            sides = ["forward"] if link.reverse is None else ["forward", "reverse"]
            for side in sides:
                matrix = link.get_channel_matrix(side)
                self.matrices.append((sweep_value, trial, link.name, side, matrix.copy()))
                for index, row in enumerate(matrix):
                    cells = []
                    for entry in row:
                        cells.extend([_format_cell(float(entry.real)), _format_cell(float(entry.imag))])
                    self.rows.append(
                        [_format_cell(sweep_value), str(trial), link.name, side, str(index)] + cells
                    )

    def to_csv(self) -> str:
        width = max((len(row) - 5) // 2 for row in self.rows) if self.rows else 0
        header = ["sweep_value", "trial", "link", "direction", "row"]
        for column in range(width):
            header.extend([f"re_{column}", f"im_{column}"])
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def write(self, destination):
        try:
            Path(destination).write_text(self.to_csv())
        except OSError as e:
            raise SimulationError(f"Cannot write channel dump to {destination}: {e}") from e


def pattern_rows(points: List[tuple[float, complex]]) -> List[dict]:
    """Angle, complex gain parts and magnitude in dB (None at an exact null)."""
    rows = []
    for angle, gain in points:
        magnitude = abs(gain)
        rows.append(
            {
                "angle": angle,
                "gain_real": gain.real,
                "gain_imag": gain.imag,
                "magnitude_db": 20.0 * math.log10(magnitude) if magnitude > 0 else None,
            }
        )
    return rows


def pattern_to_csv(points: List[tuple[float, complex]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["angle", "gain_real", "gain_imag", "magnitude_db"])
    for row in pattern_rows(points):
        writer.writerow([_format_cell(row[key]) for key in ("angle", "gain_real", "gain_imag", "magnitude_db")])
    return buffer.getvalue()
