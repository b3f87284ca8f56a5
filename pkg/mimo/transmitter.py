"""
Digital and hybrid digital/analog transmitters.

A transmitter emits x = √Ptx·F·s where Ptx = P/B is the energy per symbol and
F the (effective) precoder. The precoder always satisfies ||F||_F² ≤ E.
"""

import logging
import math
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mimo.array import ArrayGeometry, make_ula
from mimo.errors import TransceiverError
from mimo.units import dbm_to_watts

logger = logging.getLogger(__name__)

AmplitudeStepping = Literal["linear", "logarithmic"]

DEFAULT_DYNAMIC_RANGE_DB = 30.0
KEEP_TOLERANCE = 1e-12


def energy_per_symbol(power: float, unit: str, bandwidth: float) -> float:
    """
    Converts a transmit power into energy per symbol, Ptx = P·B⁻¹.

    Args:
        power (float): Transmit power in `unit`.
        unit (str): "W" or "dBm".
        bandwidth (float): Symbol bandwidth in Hz.

    Returns:
        float: Energy per symbol in joules.

    Raises:
        TransceiverError: On a non-positive bandwidth or an unknown unit.
    """
    if bandwidth <= 0:
        raise TransceiverError(f"Symbol bandwidth must be positive, got {bandwidth}")
    return power_to_watts(power, unit) / bandwidth


def power_to_watts(power: float, unit: str) -> float:
    if unit == "dBm":
        return dbm_to_watts(power)
    if unit == "W":
        if power < 0:
            raise TransceiverError(f"Transmit power must be non-negative, got {power}")
        return float(power)
    raise TransceiverError(f"Unknown power unit '{unit}', expected 'W' or 'dBm'")


def frobenius_energy(matrix: np.ndarray) -> float:
    return float(np.sum(np.abs(matrix) ** 2))


def enforce_precoder_budget(precoder: np.ndarray, budget: float) -> np.ndarray:
    """Scales `precoder` down to ||F||² = budget when it exceeds it; never scales up."""
    energy = frobenius_energy(precoder)
    if energy <= budget:
        return precoder
    return precoder * math.sqrt(budget / energy)


def subarray_mask(num_antennas: int, num_rf_chains: int) -> np.ndarray:
    """Block-diagonal connection mask: each RF chain drives a contiguous group of antennas."""
    if num_rf_chains < 1 or num_antennas % num_rf_chains:
        raise TransceiverError(
            f"{num_antennas} antennas cannot be split evenly over {num_rf_chains} RF chains"
        )
    group = num_antennas // num_rf_chains
    return np.kron(np.eye(num_rf_chains, dtype=bool), np.ones((group, 1), dtype=bool))


def _unbounded(bits) -> bool:
    return bits is None or math.isinf(bits)


def _snap_amplitudes(
    magnitudes: np.ndarray, bits: int, stepping: AmplitudeStepping, dynamic_range_db: float
) -> np.ndarray:
    peak = magnitudes.max()
    levels_count = 2 ** int(bits)
    if stepping == "linear":
        levels = peak * (np.arange(1, levels_count + 1) / levels_count)
        distance = np.abs(magnitudes[:, None] - levels[None, :])
    elif stepping == "logarithmic":
        offsets_db = np.linspace(-dynamic_range_db, 0.0, levels_count)
        levels = peak * 10.0 ** (offsets_db / 20.0)
        distance = np.abs(
            20.0 * np.log10(magnitudes[:, None] / peak) - offsets_db[None, :]
        )
    else:
        raise TransceiverError(f"Unknown amplitude stepping '{stepping}'")
    return levels[np.argmin(distance, axis=1)]


def _snap_phases(phases: np.ndarray, bits: int) -> np.ndarray:
    levels_count = 2 ** int(bits)
    step = 2.0 * np.pi / levels_count
    index = np.mod(np.ceil(phases / step - 0.5), levels_count)
    return np.exp(1j * step * index)


def quantize_analog(
    analog: np.ndarray,
    mask: Optional[np.ndarray] = None,
    phase_bits=None,
    amplitude_bits=None,
    stepping: AmplitudeStepping = "linear",
    dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB,
) -> np.ndarray:
    """
    Enforces the analog beamforming constraints on `analog`.

    1. Entries where `mask` is False become exactly 0.
    2. Amplitudes: 0 bits forces unit magnitude, b bits snaps to 2^b levels
       (linear on (0, peak] or uniform in dB over `dynamic_range_db` below the
       peak), None/inf keeps them.
    3. Phases: b bits snaps to the grid 2πk/2^b, None/inf keeps them.

    Ties go to the lower grid index. Entries already on the grids are left
    untouched, so applying the function twice equals applying it once.

    Raises:
        TransceiverError: If the mask shape does not match.
    """
    analog = np.asarray(analog, dtype=complex)
    if mask is None:
        mask = np.ones(analog.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != analog.shape:
        raise TransceiverError(
            f"Connection mask shape {mask.shape} does not match analog matrix {analog.shape}"
        )
    masked = np.where(mask, analog, 0.0 + 0.0j)
    active = np.abs(masked) > 0
    if not np.any(active):
        return masked

    values = masked[active]
    magnitudes = np.abs(values)
    if amplitude_bits == 0:
        magnitudes = np.ones_like(magnitudes)
    elif not _unbounded(amplitude_bits):
        magnitudes = _snap_amplitudes(magnitudes, amplitude_bits, stepping, dynamic_range_db)

    if _unbounded(phase_bits):
        units = values / np.abs(values)
    else:
        units = _snap_phases(np.angle(values), phase_bits)

    snapped = magnitudes * units
    keep = np.abs(snapped - values) <= KEEP_TOLERANCE * np.abs(values)
    quantized = masked.copy()
    quantized[active] = np.where(keep, values, snapped)
    return quantized


class Transmitter(BaseModel):
    """
    Fully digital transmitter.

    `precoder` is Nt x Ns; `power_budget` defaults to Ns and `symbol_covariance`
    to I/Ns, both reset whenever the stream count changes.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    array: ArrayGeometry = Field(default_factory=lambda: make_ula(1))
    transmit_power: float = Field(1.0, ge=0)
    symbol_bandwidth: float = Field(1.0, gt=0)
    num_streams: int = Field(1, ge=1)
    power_budget: Optional[float] = Field(None, gt=0)
    precoder: Optional[np.ndarray] = None
    symbol_covariance: Optional[np.ndarray] = None
    transmit_symbol: Optional[np.ndarray] = None
    csi: Optional["ChannelStateInformation"] = None
    is_on: bool = True

    def model_post_init(self, __context):
        if self.power_budget is None:
            self.power_budget = float(self.num_streams)
        if self.symbol_covariance is None:
            self.symbol_covariance = np.eye(self.num_streams, dtype=complex) / self.num_streams
        if self.precoder is None:
            self.reset_precoder()

    @property
    def num_antennas(self) -> int:
        return self.array.num_elements

    @property
    def energy_per_symbol(self) -> float:
        return self.transmit_power / self.symbol_bandwidth

    @property
    def effective_precoder(self) -> np.ndarray:
        return self.precoder

    def reset_precoder(self):
        self.precoder = enforce_precoder_budget(
            np.eye(self.num_antennas, self.num_streams, dtype=complex), self.power_budget
        )

    def set_array(self, array: ArrayGeometry):
        self.array = array
        self.reset_precoder()

    def set_transmit_power(self, power: float, unit: str = "W"):
        self.transmit_power = power_to_watts(power, unit)

    def set_symbol_bandwidth(self, bandwidth: float):
        if bandwidth <= 0:
            raise TransceiverError(f"Symbol bandwidth must be positive, got {bandwidth}")
        self.symbol_bandwidth = float(bandwidth)

    def set_num_streams(self, num_streams: int):
        if num_streams < 1:
            raise TransceiverError(f"Number of streams must be at least 1, got {num_streams}")
        self.num_streams = int(num_streams)
        self.power_budget = float(num_streams)
        self.symbol_covariance = np.eye(num_streams, dtype=complex) / num_streams
        self.transmit_symbol = None
        self.reset_precoder()

    def set_power_budget(self, budget: float):
        if budget <= 0:
            raise TransceiverError(f"Precoder power budget must be positive, got {budget}")
        self.power_budget = float(budget)
        self.precoder = enforce_precoder_budget(self.precoder, self.power_budget)

    def _check_precoder_shape(self, precoder: np.ndarray):
        expected = (self.num_antennas, self.num_streams)
        if precoder.shape != expected:
            raise TransceiverError(f"Precoder must be {expected}, got {precoder.shape}")

    def set_precoder(self, precoder):
        """Stores F, normalized down to the power budget when it exceeds it."""
        precoder = np.asarray(precoder, dtype=complex)
        if precoder.ndim < 2:
            precoder = precoder.reshape(-1, 1)
        self._check_precoder_shape(precoder)
        self.precoder = enforce_precoder_budget(precoder, self.power_budget)

    def set_symbol_covariance(self, covariance):
        covariance = np.atleast_2d(np.asarray(covariance, dtype=complex))
        if covariance.shape != (self.num_streams, self.num_streams):
            raise TransceiverError(
                f"Symbol covariance must be {self.num_streams}x{self.num_streams}, "
                f"got {covariance.shape}"
            )
        if not np.allclose(covariance, covariance.conj().T, atol=1e-12):
            raise TransceiverError("Symbol covariance must be Hermitian")
        if np.min(np.linalg.eigvalsh(covariance)) < -1e-12:
            raise TransceiverError("Symbol covariance must be positive semidefinite")
        self.symbol_covariance = covariance

    def set_transmit_symbol(self, symbol):
        symbol = np.asarray(symbol, dtype=complex).reshape(-1)
        if len(symbol) != self.num_streams:
            raise TransceiverError(
                f"Transmit symbol must have {self.num_streams} entries, got {len(symbol)}"
            )
        self.transmit_symbol = symbol

    def draw_transmit_symbol(self, rng: np.random.Generator) -> np.ndarray:
        """Draws s ~ CN(0, Rs) and stores it as the transmit symbol."""
        eigenvalues, eigenvectors = np.linalg.eigh(self.symbol_covariance)
        shaping = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        white = (
            rng.standard_normal(self.num_streams) + 1j * rng.standard_normal(self.num_streams)
        ) / math.sqrt(2.0)
        self.transmit_symbol = shaping @ white
        return self.transmit_symbol

    def set_channel_state_information(self, csi: "ChannelStateInformation"):
        self.csi = csi

    def turn_off(self):
        """Zeros the precoder; strategies leave a turned-off transmitter silent."""
        self.is_on = False
        self.precoder = np.zeros((self.num_antennas, self.num_streams), dtype=complex)

    def turn_on(self):
        self.is_on = True
        self.reset_precoder()

    def configure_transmitter(self, strategy: str = "eigen"):
        """
        Designs the precoder from the stored CSI with a registered strategy.

        Raises:
            TransceiverError: Unknown strategy or no CSI supplied.
        """
        configure = TRANSMIT_STRATEGIES.get(strategy)
        if configure is None:
            raise TransceiverError(f"Unknown transmit strategy '{strategy}'")
        if not self.is_on:
            logger.warning("Transmitter is turned off; '%s' leaves its precoder at zero", strategy)
            return
        if self.csi is None:
            raise TransceiverError("Transmitter has no channel state information")
        configure(self, self.csi)
        logger.debug("Configured transmitter with '%s' (Ns=%d)", strategy, self.num_streams)

    def transmit(self, symbol=None) -> np.ndarray:
        """x = √Ptx·F·s; `symbol` defaults to the stored transmit symbol."""
        if symbol is not None:
            self.set_transmit_symbol(symbol)
        if self.transmit_symbol is None:
            raise TransceiverError("Transmitter has no transmit symbol")
        return math.sqrt(self.energy_per_symbol) * (self.effective_precoder @ self.transmit_symbol)


class HybridTransmitter(Transmitter):
    """
    Transmitter with an analog precoder F_RF (Nt x Lt) ahead of a digital
    precoder F_BB (Lt x Ns); the effective precoder is F_RF·F_BB.
    """

    num_rf_chains: int = Field(1, ge=1)
    precoder_analog: Optional[np.ndarray] = None
    precoder_digital: Optional[np.ndarray] = None
    connection_mask: Optional[np.ndarray] = None
    phase_bits: Optional[float] = None
    amplitude_bits: Optional[float] = None
    amplitude_stepping: AmplitudeStepping = "linear"
    dynamic_range_db: float = Field(DEFAULT_DYNAMIC_RANGE_DB, gt=0)
    digital_power_budget: float = Field(math.inf, gt=0)

    def model_post_init(self, __context):
        if self.connection_mask is None:
            self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        super().model_post_init(__context)

    @property
    def effective_precoder(self) -> np.ndarray:
        return self.precoder_analog @ self.precoder_digital

    def reset_precoder(self):
        self.precoder_analog = self._quantize(
            np.eye(self.num_antennas, self.num_rf_chains, dtype=complex)
        )
        self.precoder_digital = np.eye(self.num_rf_chains, self.num_streams, dtype=complex)
        self._enforce_budgets()

    def set_array(self, array: ArrayGeometry):
        self.array = array
        self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        self.reset_precoder()

    def _quantize(self, analog: np.ndarray) -> np.ndarray:
        return quantize_analog(
            analog,
            self.connection_mask,
            self.phase_bits,
            self.amplitude_bits,
            self.amplitude_stepping,
            self.dynamic_range_db,
        )

    def _enforce_budgets(self):
        if not math.isinf(self.digital_power_budget):
            self.precoder_digital = enforce_precoder_budget(
                self.precoder_digital, self.digital_power_budget
            )
        energy = frobenius_energy(self.effective_precoder)
        if energy > self.power_budget:
            self.precoder_digital = self.precoder_digital * math.sqrt(self.power_budget / energy)

    def set_num_rf_chains(self, num_rf_chains: int):
        if num_rf_chains < 1:
            raise TransceiverError(f"Number of RF chains must be at least 1, got {num_rf_chains}")
        self.num_rf_chains = int(num_rf_chains)
        self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        self.reset_precoder()

    def set_connections(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.num_antennas, self.num_rf_chains):
            raise TransceiverError(
                f"Connection mask must be {(self.num_antennas, self.num_rf_chains)}, got {mask.shape}"
            )
        self.connection_mask = mask
        self.precoder_analog = self._quantize(self.precoder_analog)
        self._enforce_budgets()

    def set_phase_bits(self, bits):
        self.phase_bits = bits
        self.precoder_analog = self._quantize(self.precoder_analog)

    def set_amplitude_bits(self, bits, stepping: AmplitudeStepping = "linear"):
        self.amplitude_bits = bits
        self.amplitude_stepping = stepping
        self.precoder_analog = self._quantize(self.precoder_analog)
        self._enforce_budgets()

    def set_digital_power_budget(self, budget: float):
        if budget <= 0:
            raise TransceiverError(f"Digital power budget must be positive, got {budget}")
        self.digital_power_budget = float(budget)
        self._enforce_budgets()

    def set_power_budget(self, budget: float):
        if budget <= 0:
            raise TransceiverError(f"Precoder power budget must be positive, got {budget}")
        self.power_budget = float(budget)
        self._enforce_budgets()

    def set_precoder(self, precoder):
        raise TransceiverError(
            "A hybrid transmitter takes set_precoder_analog and set_precoder_digital"
        )

    def set_precoder_analog(self, analog):
        analog = np.asarray(analog, dtype=complex)
        if analog.shape != (self.num_antennas, self.num_rf_chains):
            raise TransceiverError(
                f"Analog precoder must be {(self.num_antennas, self.num_rf_chains)}, "
                f"got {analog.shape}"
            )
        self.precoder_analog = self._quantize(analog)
        self._enforce_budgets()

    def set_precoder_digital(self, digital):
        digital = np.asarray(digital, dtype=complex)
        if digital.shape != (self.num_rf_chains, self.num_streams):
            raise TransceiverError(
                f"Digital precoder must be {(self.num_rf_chains, self.num_streams)}, "
                f"got {digital.shape}"
            )
        self.precoder_digital = digital
        self._enforce_budgets()

    def turn_off(self):
        self.is_on = False
        self.precoder_digital = np.zeros((self.num_rf_chains, self.num_streams), dtype=complex)


class InterferenceInfo(BaseModel):
    """One interfering source as seen by a receiver: G·H of the cross link and the source itself."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    effective_channel: np.ndarray
    transmitter: Transmitter

    def signal_matrix(self) -> np.ndarray:
        tx = self.transmitter
        return math.sqrt(tx.energy_per_symbol) * (self.effective_channel @ tx.effective_precoder)

    def covariance(self) -> np.ndarray:
        a = self.signal_matrix()
        return a @ self.transmitter.symbol_covariance @ a.conj().T


class ChannelStateInformation(BaseModel):
    """
    Genie-aided CSI of one link direction.

    `effective_channel` holds G·H; the energy per symbol travels separately.
    The transmitter reference lets receiver strategies read the precoder that
    was designed after this CSI was handed out.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    effective_channel: np.ndarray
    large_scale_gain: float
    transmit_energy: float
    noise_variance: float
    transmitter: Optional[Transmitter] = None
    interference: list[InterferenceInfo] = []

    def desired_signal_matrix(self) -> np.ndarray:
        """A = √Ptx·G·H·F with the transmitter's current precoder."""
        if self.transmitter is None:
            raise TransceiverError("CSI carries no transmitter; the desired signal is unknown")
        precoder = self.transmitter.effective_precoder
        return math.sqrt(self.transmit_energy) * (self.effective_channel @ precoder)

    def desired_symbol_covariance(self) -> np.ndarray:
        if self.transmitter is None:
            raise TransceiverError("CSI carries no transmitter; the symbol covariance is unknown")
        return self.transmitter.symbol_covariance

    def interference_covariance(self) -> np.ndarray:
        num_rx = self.effective_channel.shape[0]
        total = np.zeros((num_rx, num_rx), dtype=complex)
        for source in self.interference:
            total += source.covariance()
        return total


Transmitter.model_rebuild()
HybridTransmitter.model_rebuild()
InterferenceInfo.model_rebuild()


TransmitStrategy = Callable[[Transmitter, ChannelStateInformation], None]

TRANSMIT_STRATEGIES: dict[str, TransmitStrategy] = {}


def register_transmit_strategy(name: str):
    """Registers a precoder design function under `name` for `configure_transmitter`."""

    def decorator(function: TransmitStrategy) -> TransmitStrategy:
        TRANSMIT_STRATEGIES[name] = function
        return function

    return decorator


def eigen_precoder(channel: np.ndarray, num_streams: int, budget: float) -> np.ndarray:
    """√(E/Ns) times the top-Ns right singular vectors of `channel`."""
    num_rx, num_tx = channel.shape
    if num_streams > min(num_rx, num_tx):
        raise TransceiverError(
            f"{num_streams} streams exceed the rank support of a {num_rx}x{num_tx} channel"
        )
    _, _, vh = np.linalg.svd(channel)
    return math.sqrt(budget / num_streams) * vh.conj().T[:, :num_streams]


def phase_projection(target: np.ndarray, num_chains: int) -> np.ndarray:
    """Unit-modulus analog columns: column j carries the phases of target column j mod Ns."""
    columns = [np.exp(1j * np.angle(target[:, j % target.shape[1]])) for j in range(num_chains)]
    return np.column_stack(columns)


@register_transmit_strategy("eigen")
def configure_eigen(tx: Transmitter, csi: ChannelStateInformation):
    """
    Eigenbeamforming along the effective channel's dominant right singular vectors.

    The hybrid variant extracts phases of the digital solution for F_RF,
    applies mask and resolution, and fits F_BB by least squares before the
    budgets are enforced.
    """
    target = eigen_precoder(csi.effective_channel, tx.num_streams, tx.power_budget)
    if not isinstance(tx, HybridTransmitter):
        tx.set_precoder(target)
        return
    if tx.num_rf_chains < tx.num_streams:
        raise TransceiverError(
            f"{tx.num_rf_chains} RF chains cannot carry {tx.num_streams} streams"
        )
    tx.precoder_analog = tx._quantize(phase_projection(target, tx.num_rf_chains))
    tx.precoder_digital = np.linalg.pinv(tx.precoder_analog) @ target
    tx._enforce_budgets()
