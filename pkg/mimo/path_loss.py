"""
Large-scale gain models.

Each model yields an amplitude gain G; the power loss of the path is 1/G².
"""

import logging
import math
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from mimo.channel import SPEED_OF_LIGHT
from mimo.errors import PathLossError
from mimo.units import db_to_linear, linear_to_db

logger = logging.getLogger(__name__)


class PathLossModel(str, Enum):
    FSPL = "fspl"
    FSPL_LNS = "fspl-lns"
    TWO_SLOPE = "two-slope"


class PathLossSpec(BaseModel):
    """
    Parameters of one path loss model.

    `distance`, `carrier_frequency` and `propagation_velocity` may be left
    unset in scenario files; links fill them from device coordinates and
    network-wide settings before realizing.
    """

    model: PathLossModel
    carrier_frequency: Optional[float] = Field(None, gt=0)
    propagation_velocity: Optional[float] = Field(None, gt=0)
    distance: Optional[float] = Field(None, gt=0)
    path_loss_exponent: Optional[float] = None
    shadowing_variance_db: float = Field(0.0, ge=0)
    reference_distance: Optional[float] = Field(None, gt=0)
    reference_loss: Optional[float] = Field(None, gt=0)
    exponent_near: Optional[float] = None
    exponent_far: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def reference_loss_from_db(cls, data):
        if isinstance(data, dict) and data.get("reference_loss_db") is not None:
            data = dict(data)
            data["reference_loss"] = db_to_linear(data.pop("reference_loss_db"))
        return data

    @field_validator("model", mode="before")
    @classmethod
    def normalize_model_name(cls, value):
        if isinstance(value, str):
            return value.strip().lower()
        return value

    @property
    def carrier_wavelength(self) -> float:
        if self.carrier_frequency is None:
            raise PathLossError("Path loss needs a carrier frequency")
        return (self.propagation_velocity or SPEED_OF_LIGHT) / self.carrier_frequency

    def set_reference_path_loss(self, value: float, unit: str = "dB"):
        if unit == "dB":
            value = db_to_linear(value)
        elif unit != "linear":
            raise PathLossError(f"Unknown unit '{unit}' for reference path loss")
        if value <= 0:
            raise PathLossError("Reference path loss must be positive")
        self.reference_loss = value


class GainRealization(BaseModel):
    amplitude_gain: float = Field(gt=0)

    @computed_field
    @property
    def power_loss_db(self) -> float:
        return linear_to_db(1.0 / self.amplitude_gain**2)

    @classmethod
    def from_loss_db(cls, loss_db: float) -> "GainRealization":
        return cls(amplitude_gain=math.sqrt(1.0 / db_to_linear(loss_db)))


def _require(spec: PathLossSpec, *fields: str):
    missing = [name for name in fields if getattr(spec, name) is None]
    if missing:
        raise PathLossError(
            f"{spec.model.value} path loss is missing {', '.join(missing)}"
        )
    if "distance" in fields and spec.distance <= 0:
        raise PathLossError(f"Path loss distance must be positive, got {spec.distance} m")


def fspl_loss_db(spec: PathLossSpec) -> float:
    """10·log10((4π/λ)² · d^η)."""
    _require(spec, "carrier_frequency", "distance", "path_loss_exponent")
    spreading_db = 20.0 * math.log10(4.0 * math.pi / spec.carrier_wavelength)
    return spreading_db + 10.0 * spec.path_loss_exponent * math.log10(spec.distance)


def realize_fspl(spec: PathLossSpec) -> GainRealization:
    """
    Friis free-space path loss generalized with a path loss exponent.

    G² = (λ/4π)² · (1/d)^η

    Raises:
        PathLossError: If carrier, distance or exponent is unset.
    """
    return GainRealization.from_loss_db(fspl_loss_db(spec))


def realize_fspl_lns(spec: PathLossSpec, rng: np.random.Generator) -> GainRealization:
    """FSPL with log-normal shadowing: the dB loss gains a zero-mean N(0, σ²) term per call."""
    loss_db = fspl_loss_db(spec)
    shadowing_db = rng.normal(0.0, math.sqrt(spec.shadowing_variance_db))
    return GainRealization.from_loss_db(loss_db - shadowing_db)


def realize_two_slope(spec: PathLossSpec) -> GainRealization:
    """
    1/G² = L0·(d/d0)^η1 for d ≤ d0 and L0·(d/d0)^η2 beyond.
    """
    _require(
        spec, "distance", "reference_distance", "reference_loss", "exponent_near", "exponent_far"
    )
    if spec.distance <= spec.reference_distance:
        exponent = spec.exponent_near
    else:
        exponent = spec.exponent_far
    loss_db = linear_to_db(spec.reference_loss) + 10.0 * exponent * math.log10(
        spec.distance / spec.reference_distance
    )
    return GainRealization.from_loss_db(loss_db)


PathLossRealizer = Callable[[PathLossSpec, np.random.Generator], GainRealization]

PATH_LOSS_MODELS: dict[PathLossModel, PathLossRealizer] = {
    PathLossModel.FSPL: lambda spec, rng: realize_fspl(spec),
    PathLossModel.FSPL_LNS: realize_fspl_lns,
    PathLossModel.TWO_SLOPE: lambda spec, rng: realize_two_slope(spec),
}


def realize(spec: PathLossSpec, rng: np.random.Generator) -> GainRealization:
    """Dispatches to the model's realization; deterministic models ignore `rng`."""
    realizer = PATH_LOSS_MODELS.get(spec.model)
    if realizer is None:
        raise PathLossError(f"Unsupported path loss model '{spec.model}'")
    gain = realizer(spec, rng)
    logger.debug("Realized %s path loss: %.3f dB", spec.model.value, gain.power_loss_db)
    return gain
