"""
Digital and hybrid receivers: additive noise and linear combining ŝ = W*(y + n).
"""

import logging
import math
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel, ConfigDict, Field

from mimo.array import ArrayGeometry, make_ula
from mimo.errors import NumericError, TransceiverError
from mimo.transmitter import (
    DEFAULT_DYNAMIC_RANGE_DB,
    AmplitudeStepping,
    ChannelStateInformation,
    phase_projection,
    quantize_analog,
)
from mimo.units import dbm_to_watts, watts_to_dbm

logger = logging.getLogger(__name__)


def psd_from_dbm_hz(value: float) -> float:
    """Noise PSD in dBm/Hz to joules (noise energy per symbol)."""
    return dbm_to_watts(value)


def psd_to_dbm_hz(value: float) -> float:
    return watts_to_dbm(value)


def draw_noise(noise_variance: float, num_antennas: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draws n ~ CN(0, σ²·I).

    Raises:
        TransceiverError: If σ² is not positive.
    """
    if noise_variance <= 0:
        raise TransceiverError(f"Noise variance must be positive, got {noise_variance}")
    white = rng.standard_normal(num_antennas) + 1j * rng.standard_normal(num_antennas)
    return math.sqrt(noise_variance / 2.0) * white


def received_covariance(csi: ChannelStateInformation, include_interference: bool) -> np.ndarray:
    """A·Rs·A* + σ²I, plus the interferers' covariance when requested."""
    a = csi.desired_signal_matrix()
    covariance = a @ csi.desired_symbol_covariance() @ a.conj().T
    covariance = covariance + csi.noise_variance * np.eye(a.shape[0])
    if include_interference:
        covariance = covariance + csi.interference_covariance()
    return covariance


def lmmse_combiner(csi: ChannelStateInformation, include_interference: bool) -> np.ndarray:
    """
    W = (A·Rs·A* + Σ_k A_k·Rs_k·A_k* + σ²I)⁻¹·A·Rs.

    Raises:
        NumericError: If the received covariance is singular.
    """
    covariance = received_covariance(csi, include_interference)
    cross = csi.desired_signal_matrix() @ csi.desired_symbol_covariance()
    try:
        return la.solve(covariance, cross, assume_a="her")
    except la.LinAlgError as e:
        raise NumericError(f"Received covariance is singular: {e}") from e


def symbol_mse(
    combiner: np.ndarray, csi: ChannelStateInformation, include_interference: bool = False
) -> float:
    """
    Closed-form E||W*(y + n) − s||² for the combiner `combiner` under `csi`.

    tr(W*·R·W) − 2·Re tr(W*·A·Rs) + tr(Rs)
    """
    covariance = received_covariance(csi, include_interference)
    cross = csi.desired_signal_matrix() @ csi.desired_symbol_covariance()
    w_h = combiner.conj().T
    mse = (
        np.trace(w_h @ covariance @ combiner)
        - 2.0 * np.real(np.trace(w_h @ cross))
        + np.trace(csi.desired_symbol_covariance())
    )
    return float(np.real(mse))


class Receiver(BaseModel):
    """Fully digital receiver; `combiner` is Nr x Ns."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    array: ArrayGeometry = Field(default_factory=lambda: make_ula(1))
    noise_power_per_hz: float = Field(1.0, gt=0)
    symbol_bandwidth: float = Field(1.0, gt=0)
    num_streams: int = Field(1, ge=1)
    combiner: Optional[np.ndarray] = None
    received_signal: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    estimated_symbol: Optional[np.ndarray] = None
    csi: Optional[ChannelStateInformation] = None

    def model_post_init(self, __context):
        if self.combiner is None:
            self.reset_combiner()

    @property
    def num_antennas(self) -> int:
        return self.array.num_elements

    @property
    def noise_variance(self) -> float:
        return self.noise_power_per_hz

    @property
    def effective_noise_power(self) -> float:
        """σ²·B in watts, reporting only."""
        return self.noise_power_per_hz * self.symbol_bandwidth

    @property
    def effective_combiner(self) -> np.ndarray:
        return self.combiner

    def reset_combiner(self):
        self.combiner = np.eye(self.num_antennas, self.num_streams, dtype=complex)

    def reset_signals(self):
        self.received_signal = None
        self.noise = None
        self.estimated_symbol = None

    def set_array(self, array: ArrayGeometry):
        self.array = array
        self.reset_combiner()
        self.reset_signals()

    def set_num_streams(self, num_streams: int):
        if num_streams < 1:
            raise TransceiverError(f"Number of streams must be at least 1, got {num_streams}")
        self.num_streams = int(num_streams)
        self.reset_combiner()

    def set_symbol_bandwidth(self, bandwidth: float):
        if bandwidth <= 0:
            raise TransceiverError(f"Symbol bandwidth must be positive, got {bandwidth}")
        self.symbol_bandwidth = float(bandwidth)

    def set_noise_power_per_hz(self, psd: float, unit: str = "dBm_Hz"):
        if unit == "dBm_Hz":
            psd = psd_from_dbm_hz(psd)
        elif unit != "J":
            raise TransceiverError(f"Unknown noise unit '{unit}', expected 'dBm_Hz' or 'J'")
        if psd <= 0:
            raise TransceiverError(f"Noise power spectral density must be positive, got {psd}")
        self.noise_power_per_hz = float(psd)

    def set_noise(self, noise=None, rng: Optional[np.random.Generator] = None):
        """Stores `noise`, or a fresh CN(0, σ²I) draw from `rng` when none is given."""
        if noise is None:
            if rng is None:
                raise TransceiverError("Either a noise vector or a random generator is needed")
            noise = draw_noise(self.noise_variance, self.num_antennas, rng)
        noise = np.asarray(noise, dtype=complex).reshape(-1)
        if len(noise) != self.num_antennas:
            raise TransceiverError(
                f"Noise must have {self.num_antennas} entries, got {len(noise)}"
            )
        self.noise = noise

    def set_received_signal(self, signal):
        signal = np.asarray(signal, dtype=complex).reshape(-1)
        if len(signal) != self.num_antennas:
            raise TransceiverError(
                f"Received signal must have {self.num_antennas} entries, got {len(signal)}"
            )
        self.received_signal = signal
        self.estimated_symbol = None

    def set_combiner(self, combiner):
        combiner = np.asarray(combiner, dtype=complex)
        if combiner.ndim < 2:
            combiner = combiner.reshape(-1, 1)
        expected = (self.num_antennas, self.num_streams)
        if combiner.shape != expected:
            raise TransceiverError(f"Combiner must be {expected}, got {combiner.shape}")
        self.combiner = combiner

    def set_channel_state_information(self, csi: ChannelStateInformation):
        self.csi = csi

    def configure_receiver(self, strategy: str = "mmse"):
        """
        Designs the combiner from the stored CSI with a registered strategy.

        Raises:
            TransceiverError: Unknown strategy or no CSI supplied.
        """
        configure = RECEIVE_STRATEGIES.get(strategy)
        if configure is None:
            raise TransceiverError(f"Unknown receive strategy '{strategy}'")
        if self.csi is None:
            raise TransceiverError("Receiver has no channel state information")
        configure(self, self.csi)
        logger.debug("Configured receiver with '%s' (Ns=%d)", strategy, self.num_streams)

    def combine(self) -> np.ndarray:
        """ŝ = W*(y + n); a missing noise vector counts as zero."""
        if self.received_signal is None:
            raise TransceiverError("Receiver has no received signal")
        noise = self.noise if self.noise is not None else 0.0
        self.estimated_symbol = self.effective_combiner.conj().T @ (self.received_signal + noise)
        return self.estimated_symbol


class HybridReceiver(Receiver):
    """Analog combiner W_RF (Nr x Lr) followed by a digital combiner W_BB (Lr x Ns)."""

    num_rf_chains: int = Field(1, ge=1)
    combiner_analog: Optional[np.ndarray] = None
    combiner_digital: Optional[np.ndarray] = None
    connection_mask: Optional[np.ndarray] = None
    phase_bits: Optional[float] = None
    amplitude_bits: Optional[float] = None
    amplitude_stepping: AmplitudeStepping = "linear"
    dynamic_range_db: float = Field(DEFAULT_DYNAMIC_RANGE_DB, gt=0)

    def model_post_init(self, __context):
        if self.connection_mask is None:
            self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        super().model_post_init(__context)

    @property
    def effective_combiner(self) -> np.ndarray:
        return self.combiner_analog @ self.combiner_digital

    def reset_combiner(self):
        self.combiner_analog = self._quantize(
            np.eye(self.num_antennas, self.num_rf_chains, dtype=complex)
        )
        self.combiner_digital = np.eye(self.num_rf_chains, self.num_streams, dtype=complex)

    def set_array(self, array: ArrayGeometry):
        self.array = array
        self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        self.reset_combiner()
        self.reset_signals()

    def _quantize(self, analog: np.ndarray) -> np.ndarray:
        return quantize_analog(
            analog,
            self.connection_mask,
            self.phase_bits,
            self.amplitude_bits,
            self.amplitude_stepping,
            self.dynamic_range_db,
        )

    def set_num_rf_chains(self, num_rf_chains: int):
        if num_rf_chains < 1:
            raise TransceiverError(f"Number of RF chains must be at least 1, got {num_rf_chains}")
        self.num_rf_chains = int(num_rf_chains)
        self.connection_mask = np.ones((self.num_antennas, self.num_rf_chains), dtype=bool)
        self.reset_combiner()

    def set_connections(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.num_antennas, self.num_rf_chains):
            raise TransceiverError(
                f"Connection mask must be {(self.num_antennas, self.num_rf_chains)}, got {mask.shape}"
            )
        self.connection_mask = mask
        self.combiner_analog = self._quantize(self.combiner_analog)

    def set_phase_bits(self, bits):
        self.phase_bits = bits
        self.combiner_analog = self._quantize(self.combiner_analog)

    def set_amplitude_bits(self, bits, stepping: AmplitudeStepping = "linear"):
        self.amplitude_bits = bits
        self.amplitude_stepping = stepping
        self.combiner_analog = self._quantize(self.combiner_analog)

    def set_combiner(self, combiner):
        raise TransceiverError(
            "A hybrid receiver takes set_combiner_analog and set_combiner_digital"
        )

    def set_combiner_analog(self, analog):
        analog = np.asarray(analog, dtype=complex)
        if analog.shape != (self.num_antennas, self.num_rf_chains):
            raise TransceiverError(
                f"Analog combiner must be {(self.num_antennas, self.num_rf_chains)}, "
                f"got {analog.shape}"
            )
        self.combiner_analog = self._quantize(analog)

    def set_combiner_digital(self, digital):
        digital = np.asarray(digital, dtype=complex)
        if digital.shape != (self.num_rf_chains, self.num_streams):
            raise TransceiverError(
                f"Digital combiner must be {(self.num_rf_chains, self.num_streams)}, "
                f"got {digital.shape}"
            )
        self.combiner_digital = digital


ReceiveStrategy = Callable[[Receiver, ChannelStateInformation], None]

RECEIVE_STRATEGIES: dict[str, ReceiveStrategy] = {}


def register_receive_strategy(name: str):
    """Registers a combiner design function under `name` for `configure_receiver`."""

    def decorator(function: ReceiveStrategy) -> ReceiveStrategy:
        RECEIVE_STRATEGIES[name] = function
        return function

    return decorator


def eigen_combiner(channel: np.ndarray, num_streams: int) -> np.ndarray:
    """Top-Ns left singular vectors of `channel`."""
    num_rx, num_tx = channel.shape
    if num_streams > min(num_rx, num_tx):
        raise TransceiverError(
            f"{num_streams} streams exceed the rank support of a {num_rx}x{num_tx} channel"
        )
    u, _, _ = np.linalg.svd(channel)
    return u[:, :num_streams]


def _check_hybrid_chains(rx: "HybridReceiver"):
    if rx.num_rf_chains < rx.num_streams:
        raise TransceiverError(
            f"{rx.num_rf_chains} RF chains cannot carry {rx.num_streams} streams"
        )


@register_receive_strategy("eigen")
def configure_eigen(rx: Receiver, csi: ChannelStateInformation):
    target = eigen_combiner(csi.effective_channel, rx.num_streams)
    if not isinstance(rx, HybridReceiver):
        rx.set_combiner(target)
        return
    _check_hybrid_chains(rx)
    rx.combiner_analog = rx._quantize(phase_projection(target, rx.num_rf_chains))
    rx.combiner_digital = np.linalg.pinv(rx.combiner_analog) @ target


def _configure_lmmse(rx: Receiver, csi: ChannelStateInformation, include_interference: bool):
    if not isinstance(rx, HybridReceiver):
        rx.set_combiner(lmmse_combiner(csi, include_interference))
        return
    # digital LMMSE on the analog-projected observation z = W_RF*(y + n)
    _check_hybrid_chains(rx)
    steering = eigen_combiner(csi.effective_channel, rx.num_streams)
    analog = rx._quantize(phase_projection(steering, rx.num_rf_chains))
    covariance = received_covariance(csi, include_interference)
    cross = csi.desired_signal_matrix() @ csi.desired_symbol_covariance()
    projected = analog.conj().T @ covariance @ analog
    rx.combiner_analog = analog
    rx.combiner_digital = np.linalg.pinv(projected, hermitian=True) @ (analog.conj().T @ cross)


@register_receive_strategy("mmse")
def configure_mmse(rx: Receiver, csi: ChannelStateInformation):
    """Linear MMSE against noise only."""
    _configure_lmmse(rx, csi, include_interference=False)


@register_receive_strategy("mmse-int")
def configure_mmse_interference(rx: Receiver, csi: ChannelStateInformation):
    """Linear MMSE against noise plus the interference listed in the CSI."""
    _configure_lmmse(rx, csi, include_interference=True)
