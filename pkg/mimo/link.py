"""
Devices and the head/tail link between them.

A link carries a forward direction (head → tail) and, when the tail can
transmit and the head can receive, a reverse direction. Each direction owns
its own deep copy of the channel and path loss specs, the realized channel
matrix H and the large-scale amplitude gain G.
"""

import logging
import math
from enum import Enum
from typing import Literal, Optional

import numpy as np
import scipy.linalg as la
from pydantic import BaseModel, ConfigDict, Field

from mimo import channel as channel_models
from mimo import path_loss as path_loss_models
from mimo.array import ArrayGeometry
from mimo.channel import SPEED_OF_LIGHT, ChannelSpec, PropagationContext
from mimo.errors import LinkError, NumericError
from mimo.path_loss import PathLossSpec
from mimo.receiver import HybridReceiver, Receiver
from mimo.transmitter import ChannelStateInformation, HybridTransmitter, Transmitter
from mimo.units import db_to_linear, linear_to_db, watts_to_dbm

logger = logging.getLogger(__name__)

LinkSide = Literal["forward", "reverse"]


class Capability(str, Enum):
    TRANSMITTER = "transmitter"
    RECEIVER = "receiver"
    TRANSCEIVER = "transceiver"


class Architecture(str, Enum):
    DIGITAL = "digital"
    HYBRID = "hybrid"


class Device(BaseModel):
    """
    A transmitter, a receiver or both, placed at a Cartesian coordinate in meters.

    `source` and `destination` hold device names once the device joins a
    source-destination pair in a network.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str = "device"
    capability: Capability = Capability.TRANSCEIVER
    architecture: Architecture = Architecture.DIGITAL
    coordinate: tuple[float, float, float] = (0.0, 0.0, 0.0)
    marker: str = "o"
    transmitter: Optional[Transmitter] = None
    receiver: Optional[Receiver] = None
    source: Optional[str] = None
    destination: Optional[str] = None

    def model_post_init(self, __context):
        hybrid = self.architecture == Architecture.HYBRID
        if self.is_transmitter and self.transmitter is None:
            self.transmitter = HybridTransmitter() if hybrid else Transmitter()
        if self.is_receiver and self.receiver is None:
            self.receiver = HybridReceiver() if hybrid else Receiver()
        if not self.is_transmitter and self.transmitter is not None:
            raise LinkError(f"Device '{self.name}' cannot transmit but has a transmitter")
        if not self.is_receiver and self.receiver is not None:
            raise LinkError(f"Device '{self.name}' cannot receive but has a receiver")

    @classmethod
    def create(
        cls, capability: str = "transceiver", architecture: str = "digital", **kwargs
    ) -> "Device":
        return cls(capability=Capability(capability), architecture=Architecture(architecture), **kwargs)

    @property
    def is_transmitter(self) -> bool:
        return self.capability in (Capability.TRANSMITTER, Capability.TRANSCEIVER)

    @property
    def is_receiver(self) -> bool:
        return self.capability in (Capability.RECEIVER, Capability.TRANSCEIVER)

    def distance_to(self, other: "Device") -> float:
        return math.dist(self.coordinate, other.coordinate)

    def set_name(self, name: str):
        self.name = name

    def set_marker(self, marker: str):
        self.marker = marker

    def set_coordinate(self, coordinate):
        self.coordinate = tuple(float(c) for c in coordinate)

    def set_source(self, source: Optional[str]):
        self.source = source

    def set_destination(self, destination: Optional[str]):
        self.destination = destination

    def set_arrays(self, transmit_array: ArrayGeometry, receive_array: Optional[ArrayGeometry] = None):
        """Sets the transmit and receive arrays; one array given serves both."""
        if self.transmitter is not None:
            self.transmitter.set_array(transmit_array)
        if self.receiver is not None:
            self.receiver.set_array(receive_array or transmit_array)

    def set_transmit_array(self, array: ArrayGeometry):
        if self.transmitter is None:
            raise LinkError(f"Device '{self.name}' has no transmitter")
        self.transmitter.set_array(array)

    def set_receive_array(self, array: ArrayGeometry):
        if self.receiver is None:
            raise LinkError(f"Device '{self.name}' has no receiver")
        self.receiver.set_array(array)

    def set_num_streams(self, num_streams: int):
        for side in (self.transmitter, self.receiver):
            if side is not None:
                side.set_num_streams(num_streams)

    def set_symbol_bandwidth(self, bandwidth: float):
        for side in (self.transmitter, self.receiver):
            if side is not None:
                side.set_symbol_bandwidth(bandwidth)

    def set_transmit_power(self, power: float, unit: str = "W"):
        if self.transmitter is not None:
            self.transmitter.set_transmit_power(power, unit)

    def set_noise_power_per_hz(self, psd: float, unit: str = "dBm_Hz"):
        if self.receiver is not None:
            self.receiver.set_noise_power_per_hz(psd, unit)

    def set_num_rf_chains(self, transmit_chains: int, receive_chains: Optional[int] = None):
        if self.architecture != Architecture.HYBRID:
            raise LinkError(f"Device '{self.name}' is not hybrid and has no RF chains to set")
        if self.transmitter is not None:
            self.transmitter.set_num_rf_chains(transmit_chains)
        if self.receiver is not None:
            self.receiver.set_num_rf_chains(receive_chains or transmit_chains)

    def turn_off(self):
        if self.transmitter is not None:
            self.transmitter.turn_off()

    def turn_on(self):
        if self.transmitter is not None:
            self.transmitter.turn_on()


class LinkBudget(BaseModel):
    """Log-scale budget of one link direction; snr_db = received − noise."""

    transmit_power_dbm: float
    path_loss_db: float
    received_power_dbm: float
    noise_power_dbm: float
    snr_db: float


class LinkDirection(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    channel: Optional[ChannelSpec] = None
    path_loss: Optional[PathLossSpec] = None
    channel_matrix: Optional[np.ndarray] = None
    large_scale_gain: Optional[float] = None
    snr_target: Optional[float] = None

    @property
    def is_realized(self) -> bool:
        return self.channel_matrix is not None and self.large_scale_gain is not None


def gaussian_mutual_information(signal_covariance: np.ndarray, noise_covariance: np.ndarray) -> float:
    """
    log2 det(I + Rn⁻¹·Ry) in bits per channel use.

    Raises:
        NumericError: If the noise covariance is singular.
    """
    try:
        eigenvalues = la.eigvalsh(signal_covariance, noise_covariance)
    except la.LinAlgError as e:
        raise NumericError(f"Noise-plus-interference covariance is singular: {e}") from e
    return float(np.sum(np.log2(1.0 + np.clip(eigenvalues, 0.0, None))))


def estimation_error(estimate: np.ndarray, symbol: np.ndarray) -> tuple[float, float]:
    """(||ŝ − s||², ||ŝ − s||²/||s||²)."""
    energy = float(np.sum(np.abs(symbol) ** 2))
    if energy == 0.0:
        raise LinkError("Transmit symbol is zero; the normalized estimation error is undefined")
    absolute = float(np.sum(np.abs(estimate - symbol) ** 2))
    return absolute, absolute / energy


class Link(BaseModel):
    """
    Head → tail link.

    Metrics always refer to the most recent realization; realizing again
    clears the signals stored at the receivers of this link.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    head: Device
    tail: Device
    forward: LinkDirection = Field(default_factory=LinkDirection)
    reverse: Optional[LinkDirection] = None
    channel_symmetric: bool = False
    path_loss_symmetric: bool = False
    carrier_frequency: Optional[float] = Field(None, gt=0)
    propagation_velocity: float = Field(SPEED_OF_LIGHT, gt=0)

    @classmethod
    def create(cls, head: Device, tail: Device) -> "Link":
        """
        Creates a link from `head` to `tail`.

        Raises:
            LinkError: If the head cannot transmit or the tail cannot receive.
        """
        if not head.is_transmitter:
            raise LinkError(f"Link head '{head.name}' cannot transmit")
        if not tail.is_receiver:
            raise LinkError(f"Link tail '{tail.name}' cannot receive")
        reverse = LinkDirection() if tail.is_transmitter and head.is_receiver else None
        return cls(head=head, tail=tail, reverse=reverse)

    @property
    def name(self) -> str:
        return f"{self.head.name}->{self.tail.name}"

    @property
    def distance(self) -> float:
        return self.head.distance_to(self.tail)

    def _side(self, side: LinkSide) -> tuple[Device, Device, LinkDirection]:
        if side == "forward":
            return self.head, self.tail, self.forward
        if side == "reverse":
            if self.reverse is None:
                raise LinkError(f"Link {self.name} has no reverse direction")
            return self.tail, self.head, self.reverse
        raise LinkError(f"Unknown link direction '{side}'")

    def _directions(self) -> list[LinkSide]:
        return ["forward"] if self.reverse is None else ["forward", "reverse"]

    def set_carrier_frequency(self, carrier_frequency: float):
        if carrier_frequency <= 0:
            raise LinkError(f"Carrier frequency must be positive, got {carrier_frequency}")
        self.carrier_frequency = float(carrier_frequency)

    def set_propagation_velocity(self, velocity: float):
        if velocity <= 0:
            raise LinkError(f"Propagation velocity must be positive, got {velocity}")
        self.propagation_velocity = float(velocity)

    def set_channel(self, forward: ChannelSpec, reverse: Optional[ChannelSpec] = None):
        """Deep-copies the specs onto each direction; the reverse defaults to the forward spec."""
        self.forward.channel = forward.model_copy(deep=True)
        if self.reverse is not None:
            self.reverse.channel = (reverse or forward).model_copy(deep=True)

    def set_path_loss(self, forward: PathLossSpec, reverse: Optional[PathLossSpec] = None):
        self.forward.path_loss = forward.model_copy(deep=True)
        if self.reverse is not None:
            self.reverse.path_loss = (reverse or forward).model_copy(deep=True)

    def _check_channel_symmetry(self):
        if self.reverse is None:
            raise LinkError(f"Link {self.name} has no reverse direction to make symmetric")
        for device in (self.head, self.tail):
            if device.transmitter.num_antennas != device.receiver.num_antennas:
                raise LinkError(
                    f"Channel symmetry needs equal transmit/receive antenna counts at "
                    f"'{device.name}' ({device.transmitter.num_antennas} vs "
                    f"{device.receiver.num_antennas})"
                )

    def set_channel_symmetric(self, symmetric: bool = True):
        if symmetric:
            self._check_channel_symmetry()
        self.channel_symmetric = symmetric

    def set_path_loss_symmetric(self, symmetric: bool = True):
        if symmetric and self.reverse is None:
            raise LinkError(f"Link {self.name} has no reverse direction to make symmetric")
        self.path_loss_symmetric = symmetric

    def _clear_signals(self):
        for device in (self.head, self.tail):
            if device.receiver is not None:
                device.receiver.reset_signals()

    def _realize_channel(self, side: LinkSide, rng: np.random.Generator) -> np.ndarray:
        tx_device, rx_device, state = self._side(side)
        if state.channel is None:
            raise LinkError(f"Link {self.name} has no {side} channel model")
        ctx = PropagationContext(
            propagation_velocity=self.propagation_velocity,
            carrier_frequency=self.carrier_frequency,
            tx_array=tx_device.transmitter.array,
            rx_array=rx_device.receiver.array,
        )
        return channel_models.realize(
            state.channel, ctx, rng, tx_device.coordinate, rx_device.coordinate
        ).matrix

    def realization_channel(self, rng: np.random.Generator):
        """Draws H for each direction; with channel symmetry H_rev = H_fwd*."""
        self.forward.channel_matrix = self._realize_channel("forward", rng)
        if self.reverse is not None:
            if self.channel_symmetric:
                self._check_channel_symmetry()
                self.reverse.channel_matrix = self.forward.channel_matrix.conj().T
            else:
                self.reverse.channel_matrix = self._realize_channel("reverse", rng)
        self._clear_signals()

    def _resolved_path_loss(self, state: LinkDirection) -> PathLossSpec:
        spec = state.path_loss
        return spec.model_copy(
            update={
                "distance": spec.distance or self.distance,
                "carrier_frequency": spec.carrier_frequency or self.carrier_frequency,
                "propagation_velocity": spec.propagation_velocity or self.propagation_velocity,
            }
        )

    def _realize_gain(self, side: LinkSide, rng: np.random.Generator) -> float:
        _, _, state = self._side(side)
        if state.path_loss is None:
            raise LinkError(f"Link {self.name} has no {side} path loss model")
        return path_loss_models.realize(self._resolved_path_loss(state), rng).amplitude_gain

    def realization_path_loss(self, rng: np.random.Generator):
        """Draws G for each direction; with path loss symmetry G_rev = G_fwd. SNR targets win."""
        self.forward.large_scale_gain = self._realize_gain("forward", rng)
        if self.reverse is not None:
            if self.path_loss_symmetric:
                self.reverse.large_scale_gain = self.forward.large_scale_gain
            else:
                self.reverse.large_scale_gain = self._realize_gain("reverse", rng)
        self._apply_snr_targets()
        self._clear_signals()

    def realization(self, rng: np.random.Generator):
        self.realization_channel(rng)
        self.realization_path_loss(rng)
        logger.debug("Realized link %s", self.name)

    def get_channel_matrix(self, side: LinkSide = "forward") -> np.ndarray:
        return self._side(side)[2].channel_matrix

    def get_large_scale_gain(self, side: LinkSide = "forward") -> float:
        return self._side(side)[2].large_scale_gain

    def require_realized(self, side: LinkSide) -> tuple[Device, Device, LinkDirection]:
        tx_device, rx_device, state = self._side(side)
        if not state.is_realized:
            raise LinkError(f"Link {self.name} ({side}) has not been realized")
        return tx_device, rx_device, state

    def snr(self, side: LinkSide = "forward") -> Optional[float]:
        """Large-scale SNR Ptx·G²/σ², None until G is known."""
        tx_device, rx_device, state = self._side(side)
        if state.large_scale_gain is None:
            return None
        return (
            tx_device.transmitter.energy_per_symbol
            * state.large_scale_gain**2
            / rx_device.receiver.noise_variance
        )

    @property
    def snr_forward(self) -> Optional[float]:
        return self.snr("forward")

    @property
    def snr_reverse(self) -> Optional[float]:
        return None if self.reverse is None else self.snr("reverse")

    def set_snr(self, forward: float, reverse: Optional[float] = None, unit: str = "dB"):
        """
        Fixes the large-scale SNR of each direction by overriding G.

        The targets persist across realizations until `clear_snr`.

        Raises:
            LinkError: Unknown unit, or a head with zero transmit energy.
        """
        if unit == "dB":
            to_linear = db_to_linear
        elif unit == "linear":
            to_linear = float
        else:
            raise LinkError(f"Unknown SNR unit '{unit}', expected 'dB' or 'linear'")
        self.forward.snr_target = to_linear(forward)
        if self.reverse is not None:
            self.reverse.snr_target = to_linear(forward if reverse is None else reverse)
        self._apply_snr_targets()

    def clear_snr(self):
        for side in self._directions():
            self._side(side)[2].snr_target = None

    def _apply_snr_targets(self):
        for side in self._directions():
            tx_device, rx_device, state = self._side(side)
            if state.snr_target is None:
                continue
            energy = tx_device.transmitter.energy_per_symbol
            if energy <= 0:
                raise LinkError(f"Cannot reach an SNR target on {self.name}: zero transmit energy")
            state.large_scale_gain = math.sqrt(
                state.snr_target * rx_device.receiver.noise_variance / energy
            )

    def compute_received_signal(self, rng: Optional[np.random.Generator] = None):
        """
        Populates y = G·H·x at the receiver of every direction and combines it.

        Noise is drawn from `rng`, a fresh draw per direction; without `rng`
        the noise is zero. The reverse direction is skipped while the tail's
        transmitter holds no symbol.

        Raises:
            TransceiverError: The head's transmitter has no symbol.
        """
        emissions = []
        for side in self._directions():
            tx_device, rx_device, state = self.require_realized(side)
            if side == "reverse" and tx_device.transmitter.transmit_symbol is None:
                continue
            emissions.append((rx_device, state, tx_device.transmitter.transmit()))
        for rx_device, state, x in emissions:
            receiver = rx_device.receiver
            receiver.set_received_signal(state.large_scale_gain * (state.channel_matrix @ x))
            if rng is None:
                receiver.set_noise(np.zeros(receiver.num_antennas))
            else:
                receiver.set_noise(rng=rng)
            receiver.combine()

    def compute_link_budget(self) -> tuple[LinkBudget, Optional[LinkBudget]]:
        """
        Log-scale budgets of the forward and (if present) reverse direction.

        The noise power integrates the receiver PSD over the transmission's
        symbol bandwidth, so snr_db always equals the stored large-scale SNR.
        """
        budgets = []
        for side in self._directions():
            tx_device, rx_device, state = self._side(side)
            if state.large_scale_gain is None:
                raise LinkError(f"Link {self.name} ({side}) has no large-scale gain")
            transmitter = tx_device.transmitter
            transmit_dbm = watts_to_dbm(transmitter.transmit_power)
            loss_db = -20.0 * math.log10(state.large_scale_gain)
            noise_dbm = watts_to_dbm(rx_device.receiver.noise_variance * transmitter.symbol_bandwidth)
            budgets.append(
                LinkBudget(
                    transmit_power_dbm=transmit_dbm,
                    path_loss_db=loss_db,
                    received_power_dbm=transmit_dbm - loss_db,
                    noise_power_dbm=noise_dbm,
                    snr_db=transmit_dbm - loss_db - noise_dbm,
                )
            )
        return budgets[0], budgets[1] if len(budgets) > 1 else None

    def _csi(self, side: LinkSide) -> ChannelStateInformation:
        tx_device, rx_device, state = self.require_realized(side)
        return ChannelStateInformation(
            effective_channel=state.large_scale_gain * state.channel_matrix,
            large_scale_gain=state.large_scale_gain,
            transmit_energy=tx_device.transmitter.energy_per_symbol,
            noise_variance=rx_device.receiver.noise_variance,
            transmitter=tx_device.transmitter,
        )

    def compute_channel_state_information(
        self,
    ) -> tuple[ChannelStateInformation, Optional[ChannelStateInformation]]:
        """Interference-free CSI of each direction; the effective channel is G·H."""
        forward = self._csi("forward")
        reverse = self._csi("reverse") if self.reverse is not None else None
        return forward, reverse

    def supply_channel_state_information(self):
        """Hands each direction's CSI to the transmitter and receiver at its two ends."""
        for side in self._directions():
            tx_device, rx_device, _ = self._side(side)
            csi = self._csi(side)
            tx_device.transmitter.set_channel_state_information(csi)
            rx_device.receiver.set_channel_state_information(csi)

    def compute_covariance(self, side: LinkSide = "forward") -> tuple[np.ndarray, np.ndarray]:
        """
        Post-combining covariances of the desired term and the noise.

        Returns:
            tuple: R_y = Ptx·G²·(W*HF)·Rs·(W*HF)* and R_n = σ²·W*W.
        """
        tx_device, rx_device, state = self.require_realized(side)
        transmitter, receiver = tx_device.transmitter, rx_device.receiver
        w_h = receiver.effective_combiner.conj().T
        desired = (
            math.sqrt(transmitter.energy_per_symbol)
            * state.large_scale_gain
            * (w_h @ state.channel_matrix @ transmitter.effective_precoder)
        )
        r_y = desired @ transmitter.symbol_covariance @ desired.conj().T
        r_n = receiver.noise_variance * (w_h @ w_h.conj().T)
        return r_y, r_n

    def mutual_information(self, side: LinkSide = "forward") -> float:
        """Gaussian-signaling mutual information log2 det(I + R_n⁻¹·R_y) in bits/s/Hz."""
        r_y, r_n = self.compute_covariance(side)
        return gaussian_mutual_information(r_y, r_n)

    def symbol_estimation_error(self, side: LinkSide = "forward") -> tuple[float, float]:
        """(absolute, normalized) error of the receiver's estimate against the sent symbol."""
        tx_device, rx_device, _ = self._side(side)
        symbol = tx_device.transmitter.transmit_symbol
        if symbol is None:
            raise LinkError(f"'{tx_device.name}' has not transmitted a symbol")
        receiver = rx_device.receiver
        estimate = receiver.estimated_symbol
        if estimate is None:
            estimate = receiver.combine()
        return estimation_error(estimate, symbol)


def snr_db(link: Link, side: LinkSide = "forward") -> Optional[float]:
    value = link.snr(side)
    return None if value is None else linear_to_db(value)
