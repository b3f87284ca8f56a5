"""
Networks of devices sharing the same radio resources.

Every source transmits to every destination through a link; the link from a
pair's own source is its desired link, every other source reaching the same
destination is an interferer.
"""

import logging
import math
import zlib
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mimo.channel import SPEED_OF_LIGHT, ChannelSpec
from mimo.errors import NetworkError
from mimo.link import Device, Link, estimation_error, gaussian_mutual_information
from mimo.path_loss import PathLossSpec
from mimo.transmitter import ChannelStateInformation, InterferenceInfo

logger = logging.getLogger(__name__)

LINK_DOMAIN = 0
NOISE_DOMAIN = 1
SYMBOL_DOMAIN = 2

DeviceRef = Union[Device, str]


def substream(master_seed: int, trial: int, domain: int, label: str) -> np.random.Generator:
    """
    Independent generator for one (trial, domain, label) triple under `master_seed`.

    Labels are link or device names, so adding a link or device never shifts
    the draws of the others.
    """
    key = (int(trial), int(domain), zlib.crc32(label.encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))


class Network(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    devices: list[Device] = []
    pairs: list[tuple[str, str]] = []
    links: dict[tuple[str, str], Link] = {}
    channel: Optional[ChannelSpec] = None
    path_loss: Optional[PathLossSpec] = None
    carrier_frequency: Optional[float] = Field(None, gt=0)
    propagation_velocity: float = Field(SPEED_OF_LIGHT, gt=0)
    transmit_csi: dict[str, ChannelStateInformation] = {}
    receive_csi: dict[str, ChannelStateInformation] = {}

    @classmethod
    def create(cls) -> "Network":
        return cls()

    def get_device(self, device: DeviceRef) -> Device:
        name = device if isinstance(device, str) else device.name
        for member in self.devices:
            if member.name == name:
                return member
        raise NetworkError(f"Unknown device '{name}'")

    def has_device(self, name: str) -> bool:
        return any(member.name == name for member in self.devices)

    def get_link(self, head: DeviceRef, tail: DeviceRef) -> Link:
        key = (self.get_device(head).name, self.get_device(tail).name)
        link = self.links.get(key)
        if link is None:
            raise NetworkError(f"No link from '{key[0]}' to '{key[1]}'")
        return link

    @property
    def sources(self) -> list[Device]:
        return self._unique([source for source, _ in self.pairs])

    @property
    def destinations(self) -> list[Device]:
        return self._unique([destination for _, destination in self.pairs])

    def _unique(self, names: list[str]) -> list[Device]:
        return [self.get_device(name) for name in dict.fromkeys(names)]

    def add_device(self, device: Device):
        if self.has_device(device.name):
            raise NetworkError(f"Device '{device.name}' is already in the network")
        self.devices.append(device)

    def remove_device(self, device: DeviceRef):
        """Removes the device along with its links and source-destination pairs."""
        name = self.get_device(device).name
        self.devices = [member for member in self.devices if member.name != name]
        self.pairs = [pair for pair in self.pairs if name not in pair]
        self.links = {key: link for key, link in self.links.items() if name not in key}

    def add_source_destination(self, source: Device, destination: Device):
        """Adds a pair; devices not yet in the network join it."""
        if not source.is_transmitter:
            raise NetworkError(f"Source '{source.name}' cannot transmit")
        if not destination.is_receiver:
            raise NetworkError(f"Destination '{destination.name}' cannot receive")
        pair = (source.name, destination.name)
        if pair in self.pairs:
            raise NetworkError(f"Pair {pair[0]} -> {pair[1]} already exists")
        for device in (source, destination):
            if not self.has_device(device.name):
                self.add_device(device)
        source.set_destination(destination.name)
        destination.set_source(source.name)
        self.pairs.append(pair)

    def remove_source_destination_pair(self, source: DeviceRef, destination: DeviceRef):
        """Removes the pair only; both devices stay in the network."""
        pair = (self.get_device(source).name, self.get_device(destination).name)
        if pair not in self.pairs:
            raise NetworkError(f"No pair {pair[0]} -> {pair[1]}")
        self.pairs.remove(pair)

    def remove_all_source_destination(self):
        """Clears every pair; links are kept."""
        self.pairs = []

    def add_link(self, link: Link):
        for device in (link.head, link.tail):
            if not self.has_device(device.name):
                self.add_device(device)
        self.links[(link.head.name, link.tail.name)] = link

    def _configure_new_link(self, link: Link):
        link.set_propagation_velocity(self.propagation_velocity)
        if self.carrier_frequency is not None:
            link.set_carrier_frequency(self.carrier_frequency)
        if self.channel is not None:
            link.set_channel(self.channel)
        if self.path_loss is not None:
            link.set_path_loss(self.path_loss)

    def populate_links(self):
        """Creates a link from every source to every destination; existing links are kept."""
        if not self.pairs:
            raise NetworkError("Cannot populate links without source-destination pairs")
        for source in self.sources:
            for destination in self.destinations:
                key = (source.name, destination.name)
                if source.name == destination.name or key in self.links:
                    continue
                link = Link.create(source, destination)
                self._configure_new_link(link)
                self.links[key] = link
        logger.debug("Network has %d links", len(self.links))

    def desired_links(self) -> list[Link]:
        return [self.get_link(source, destination) for source, destination in self.pairs]

    def set_channel(self, spec: ChannelSpec):
        self.channel = spec.model_copy(deep=True)
        for link in self.links.values():
            link.set_channel(spec)

    def set_path_loss(self, spec: PathLossSpec):
        self.path_loss = spec.model_copy(deep=True)
        for link in self.links.values():
            link.set_path_loss(spec)

    def set_carrier_frequency(self, carrier_frequency: float):
        if carrier_frequency <= 0:
            raise NetworkError(f"Carrier frequency must be positive, got {carrier_frequency}")
        self.carrier_frequency = float(carrier_frequency)
        for link in self.links.values():
            link.set_carrier_frequency(carrier_frequency)

    def set_propagation_velocity(self, velocity: float):
        if velocity <= 0:
            raise NetworkError(f"Propagation velocity must be positive, got {velocity}")
        self.propagation_velocity = float(velocity)
        for link in self.links.values():
            link.set_propagation_velocity(velocity)

    def set_symbol_bandwidth(self, bandwidth: float):
        for device in self.devices:
            device.set_symbol_bandwidth(bandwidth)

    def set_num_streams(self, num_streams: int):
        for device in self.devices:
            device.set_num_streams(num_streams)

    def set_transmit_power(self, power: float, unit: str = "W"):
        for device in self.devices:
            device.set_transmit_power(power, unit)

    def set_transmit_symbol(self, symbol):
        for device in self.devices:
            if device.transmitter is not None:
                device.transmitter.set_transmit_symbol(symbol)

    def set_noise_power_per_hz(self, psd: float, unit: str = "dBm_Hz"):
        for device in self.devices:
            device.set_noise_power_per_hz(psd, unit)

    def set_channel_symmetric(self, symmetric: bool = True):
        for link in self.links.values():
            if link.reverse is not None:
                link.set_channel_symmetric(symmetric)

    def set_path_loss_symmetric(self, symmetric: bool = True):
        for link in self.links.values():
            if link.reverse is not None:
                link.set_path_loss_symmetric(symmetric)

    def set_snr(self, forward: float, reverse: Optional[float] = None, unit: str = "dB"):
        """Fixes the large-scale SNR of every desired link."""
        for link in self.desired_links():
            link.set_snr(forward, reverse, unit)

    def set_network_wide(self, parameter: str, *args, **kwargs):
        """
        Broadcasts one system parameter by name, e.g.
        set_network_wide("noise_power_per_hz", -174, "dBm_Hz").

        Raises:
            NetworkError: Unknown parameter name.
        """
        setters = {
            "symbol_bandwidth": self.set_symbol_bandwidth,
            "propagation_velocity": self.set_propagation_velocity,
            "carrier_frequency": self.set_carrier_frequency,
            "num_streams": self.set_num_streams,
            "transmit_power": self.set_transmit_power,
            "transmit_symbol": self.set_transmit_symbol,
            "noise_power_per_hz": self.set_noise_power_per_hz,
            "channel": self.set_channel,
            "path_loss": self.set_path_loss,
            "snr": self.set_snr,
        }
        setter = setters.get(parameter)
        if setter is None:
            raise NetworkError(f"Unknown network-wide parameter '{parameter}'")
        setter(*args, **kwargs)

    def draw_transmit_symbols(self, master_seed: int, trial: int = 0):
        """Draws every source's symbol from CN(0, Rs) on its own substream."""
        for source in self.sources:
            rng = substream(master_seed, trial, SYMBOL_DOMAIN, source.name)
            source.transmitter.draw_transmit_symbol(rng)

    def realization(self, master_seed: int, trial: int = 0):
        """Realizes every link's channels and path losses on per-link substreams."""
        if not self.links:
            raise NetworkError("Network has no links to realize")
        for link in self.links.values():
            link.realization(substream(master_seed, trial, LINK_DOMAIN, link.name))
        self.transmit_csi = {}
        self.receive_csi = {}

    def _interferers(self, destination: Device, desired_source: str) -> list[Link]:
        return [
            link
            for (head, tail), link in self.links.items()
            if tail == destination.name and head != desired_source and head in self._source_names()
        ]

    def _source_names(self) -> set[str]:
        return {source for source, _ in self.pairs}

    def compute_channel_state_information(self):
        """
        Builds genie CSI: each destination gets its desired effective channel
        plus one entry per interfering source, each source gets its
        destination's desired-link CSI.
        """
        transmit_csi, receive_csi = {}, {}
        for source_name, destination_name in self.pairs:
            link = self.get_link(source_name, destination_name)
            desired, _ = link.compute_channel_state_information()
            transmit_csi[source_name] = desired
            interference = []
            for cross in self._interferers(link.tail, source_name):
                cross_csi, _ = cross.compute_channel_state_information()
                interference.append(
                    InterferenceInfo(
                        effective_channel=cross_csi.effective_channel,
                        transmitter=cross.head.transmitter,
                    )
                )
            receive_csi[destination_name] = desired.model_copy(update={"interference": interference})
        self.transmit_csi = transmit_csi
        self.receive_csi = receive_csi

    def supply_channel_state_information(self):
        if not self.transmit_csi and not self.receive_csi:
            raise NetworkError("Channel state information has not been computed")
        for name, csi in self.transmit_csi.items():
            self.get_device(name).transmitter.set_channel_state_information(csi)
        for name, csi in self.receive_csi.items():
            self.get_device(name).receiver.set_channel_state_information(csi)

    def distribute_csi(self):
        self.compute_channel_state_information()
        self.supply_channel_state_information()

    def configure_transmitter(self, strategy: str = "eigen"):
        for source in self.sources:
            source.transmitter.configure_transmitter(strategy)

    def configure_receiver(self, strategy: str = "mmse"):
        for destination in self.destinations:
            destination.receiver.configure_receiver(strategy)

    def configure_all(self, transmit_strategy: str = "eigen", receive_strategy: str = "mmse"):
        """Configures every source first, then every destination against the new precoders."""
        self.configure_transmitter(transmit_strategy)
        self.configure_receiver(receive_strategy)

    def compute_received_signals(self, master_seed: Optional[int] = None, trial: int = 0):
        """
        Superposes G·H·x over every source with a link into each destination,
        adds one noise draw per destination and combines.

        Without `master_seed` the noise is zero.
        """
        for destination in self.destinations:
            receiver = destination.receiver
            y = np.zeros(receiver.num_antennas, dtype=complex)
            for source in self.sources:
                link = self.links.get((source.name, destination.name))
                if link is None:
                    continue
                if source.transmitter.transmit_symbol is None:
                    raise NetworkError(f"Source '{source.name}' has no transmit symbol")
                _, _, state = link.require_realized("forward")
                y = y + state.large_scale_gain * (state.channel_matrix @ source.transmitter.transmit())
            receiver.set_received_signal(y)
            if master_seed is None:
                receiver.set_noise(np.zeros(receiver.num_antennas))
            else:
                receiver.set_noise(rng=substream(master_seed, trial, NOISE_DOMAIN, destination.name))
            receiver.combine()

    def interference_covariance(self, head: DeviceRef, tail: DeviceRef) -> np.ndarray:
        """Σ over interfering sources of Ptx_k·G_k²·H_k·F_k·Rs_k·F_k*·H_k* at the tail's antennas."""
        link = self.get_link(head, tail)
        total = np.zeros((link.tail.receiver.num_antennas,) * 2, dtype=complex)
        for cross in self._interferers(link.tail, link.head.name):
            _, _, state = cross.require_realized("forward")
            transmitter = cross.head.transmitter
            a = (
                math.sqrt(transmitter.energy_per_symbol)
                * state.large_scale_gain
                * (state.channel_matrix @ transmitter.effective_precoder)
            )
            total += a @ transmitter.symbol_covariance @ a.conj().T
        return total

    def report_mutual_information(self, head: DeviceRef, tail: DeviceRef) -> float:
        """
        log2 det(I + R_z⁻¹·R_y) of the link head → tail, where R_z holds the
        combined noise plus interference from every other source.
        """
        link = self.get_link(head, tail)
        r_y, r_n = link.compute_covariance("forward")
        w = link.tail.receiver.effective_combiner
        r_z = r_n + w.conj().T @ self.interference_covariance(head, tail) @ w
        return gaussian_mutual_information(r_y, r_z)

    def report_symbol_estimation_error(self, head: DeviceRef, tail: DeviceRef) -> tuple[float, float]:
        link = self.get_link(head, tail)
        receiver = link.tail.receiver
        if receiver.estimated_symbol is None:
            raise NetworkError(f"'{link.tail.name}' has no received signal; compute it first")
        symbol = link.head.transmitter.transmit_symbol
        if symbol is None:
            raise NetworkError(f"'{link.head.name}' has no transmit symbol")
        return estimation_error(receiver.estimated_symbol, symbol)

    def show_network(self) -> list[tuple[str, tuple[float, float, float], str]]:
        return [(device.name, device.coordinate, device.marker) for device in self.devices]
