import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mimo.array import ArrayGeometry, make_ula, make_upa
from mimo.channel import SPEED_OF_LIGHT, ChannelSpec
from mimo.link import Architecture, Capability
from mimo.path_loss import PathLossSpec
from mimo.receiver import RECEIVE_STRATEGIES
from mimo.transmitter import TRANSMIT_STRATEGIES


class GlobalSettings(BaseModel):
    carrier_frequency: float = Field(gt=0)
    propagation_velocity: float = Field(SPEED_OF_LIGHT, gt=0)
    symbol_bandwidth: float = Field(gt=0)
    noise_power_per_hz_dbm: float
    num_streams: int = Field(1, ge=1)
    transmit_power_dbm: float
    channel_symmetric: bool = False
    path_loss_symmetric: bool = False


class ArrayConfig(BaseModel):
    kind: Literal["ula", "upa"]
    dims: List[int]
    axis: Literal["x", "y", "z"] = "x"
    plane: Literal["xz", "xy", "yz"] = "xz"

    @model_validator(mode="after")
    def check_dims(self):
        expected = 1 if self.kind == "ula" else 2
        if len(self.dims) != expected:
            raise ValueError(f"a {self.kind} takes {expected} dimension(s), got {self.dims}")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"array dimensions must be positive, got {self.dims}")
        return self

    def build(self) -> ArrayGeometry:
        if self.kind == "ula":
            return make_ula(self.dims[0], self.axis)
        return make_upa(self.dims[0], self.dims[1], self.plane)


class HybridConfig(BaseModel):
    rf_chains: int = Field(ge=1)
    phase_bits: Optional[int] = Field(None, ge=0)
    amplitude_bits: Optional[int] = Field(None, ge=0)
    amplitude_stepping: Literal["linear", "logarithmic"] = "linear"
    mask: Literal["full", "subarray"] = "full"


class DeviceConfig(BaseModel):
    name: str = Field(min_length=1)
    capability: Capability = Capability.TRANSCEIVER
    architecture: Architecture = Architecture.DIGITAL
    coordinate: tuple[float, float, float] = (0.0, 0.0, 0.0)
    marker: str = "o"
    array: Optional[ArrayConfig] = None
    transmit_array: Optional[ArrayConfig] = None
    receive_array: Optional[ArrayConfig] = None
    hybrid: Optional[HybridConfig] = None

    @model_validator(mode="after")
    def check_hybrid(self):
        if self.architecture == Architecture.HYBRID and self.hybrid is None:
            raise ValueError(f"hybrid device '{self.name}' needs a hybrid block")
        return self

    @property
    def resolved_transmit_array(self) -> Optional[ArrayConfig]:
        return self.transmit_array or self.array

    @property
    def resolved_receive_array(self) -> Optional[ArrayConfig]:
        return self.receive_array or self.array


class StrategyConfig(BaseModel):
    transmitter: str = "eigen"
    receiver: str = "mmse"

    @field_validator("transmitter")
    @classmethod
    def known_transmit_strategy(cls, value: str):
        if value not in TRANSMIT_STRATEGIES:
            raise ValueError(f"unknown transmit strategy '{value}'")
        return value

    @field_validator("receiver")
    @classmethod
    def known_receive_strategy(cls, value: str):
        if value not in RECEIVE_STRATEGIES:
            raise ValueError(f"unknown receive strategy '{value}'")
        return value


class SweepConfig(BaseModel):
    parameter: Literal["snr_db", "transmit_power_dbm"]
    values: List[float] = Field(min_length=1)

    @field_validator("values")
    @classmethod
    def finite_values(cls, values: List[float]):
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sweep values must be finite")
        return values


class RunConfig(BaseModel):
    trials: int = Field(1, ge=0)
    master_seed: Optional[int] = Field(None, ge=0)
    sweep: Optional[SweepConfig] = None


class ScenarioConfig(BaseModel):
    """A complete declarative scenario: system settings, models, devices, pairs and run plan."""

    model_config = ConfigDict(populate_by_name=True)

    global_settings: GlobalSettings = Field(alias="global")
    channel: ChannelSpec
    path_loss: PathLossSpec
    devices: List[DeviceConfig] = Field(min_length=1)
    pairs: List[tuple[str, str]] = Field(min_length=1)
    strategies: StrategyConfig = StrategyConfig()
    run: RunConfig = RunConfig()

    @model_validator(mode="after")
    def resolve_names(self):
        names = [device.name for device in self.devices]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"devices: duplicate device name(s) {duplicates}")
        for index, (source, destination) in enumerate(self.pairs):
            for position, name in ((0, source), (1, destination)):
                if name not in names:
                    raise ValueError(f"pairs.{index}.{position}: unknown device '{name}'")
        return self


class MetricsRecord(BaseModel):
    """One pair's metrics for one trial; field order is the CSV column order."""

    trial: int
    sweep_value: Optional[float] = None
    pair: str
    mutual_information: float
    absolute_error: float
    normalized_error: float
    normalized_error_db: Optional[float] = None
    snr_db: float
    transmit_power_dbm: float
    path_loss_db: float
    received_power_dbm: float
    noise_power_dbm: float


class PatternRequest(ArrayConfig):
    weights_real: Optional[List[float]] = None
    weights_imag: Optional[List[float]] = None


class PatternPoint(BaseModel):
    angle: float
    gain_real: float
    gain_imag: float
    magnitude_db: Optional[float] = None
