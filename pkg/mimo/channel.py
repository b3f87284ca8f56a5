"""
Frequency-flat channel models.

Every model produces an Nr x Nt complex matrix with E||H||_F^2 = Nt*Nr.
When `force_normalization` is set, each realization is additionally scaled to
exactly `normalized_energy` (default Nt*Nr).
"""

import logging
import math
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from mimo.array import ArrayGeometry, Direction
from mimo.errors import ChannelError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3e8


class ChannelModel(str, Enum):
    RAYLEIGH = "rayleigh"
    LOS = "los"
    RICIAN = "rician"
    RAY_CLUSTER = "ray-cluster"
    SPHERICAL_WAVE = "spherical-wave"


class PropagationContext(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    propagation_velocity: float = Field(SPEED_OF_LIGHT, gt=0)
    carrier_frequency: Optional[float] = Field(None, gt=0)
    tx_array: ArrayGeometry
    rx_array: ArrayGeometry

    @property
    def carrier_wavelength(self) -> float:
        if self.carrier_frequency is None:
            raise ChannelError("Carrier frequency is not set; no wavelength available")
        return self.propagation_velocity / self.carrier_frequency

    @property
    def num_tx(self) -> int:
        return self.tx_array.num_elements

    @property
    def num_rx(self) -> int:
        return self.rx_array.num_elements


class ChannelSpec(BaseModel):
    model: ChannelModel
    rician_kappa: Optional[float] = Field(None, ge=0)
    num_clusters: Optional[int] = Field(None, ge=1)
    num_rays: Optional[int] = Field(None, ge=1)
    angle_spread: float = Field(0.1, ge=0)
    los_aod: Optional[Direction] = None
    los_aoa: Optional[Direction] = None
    force_normalization: bool = False
    normalized_energy: Optional[float] = Field(None, gt=0)

    @field_validator("model", mode="before")
    @classmethod
    def normalize_model_name(cls, value):
        if isinstance(value, str):
            return value.strip().lower()
        return value


class ChannelRealization(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _uniform_direction(rng: np.random.Generator) -> Direction:
    return Direction(
        azimuth=float(rng.uniform(-math.pi, math.pi)),
        elevation=float(rng.uniform(-math.pi / 2, math.pi / 2)),
    )


def _offset_direction(center: Direction, spread: float, rng: np.random.Generator) -> Direction:
    azimuth = center.azimuth + rng.laplace(0.0, spread) if spread > 0 else center.azimuth
    elevation = center.elevation + rng.laplace(0.0, spread) if spread > 0 else center.elevation
    return Direction(
        azimuth=float(np.clip(azimuth, -math.pi, math.pi)),
        elevation=float(np.clip(elevation, -math.pi / 2, math.pi / 2)),
    )


def _require_arrays(ctx: PropagationContext):
    if ctx.num_tx == 0 or ctx.num_rx == 0:
        raise ChannelError("Transmit and receive arrays must both have elements")


def realize_rayleigh(ctx: PropagationContext, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. CN(0, 1) entries."""
    _require_arrays(ctx)
    return _complex_normal(rng, (ctx.num_rx, ctx.num_tx))


def realize_los(
    spec: ChannelSpec, ctx: PropagationContext, rng: np.random.Generator
) -> np.ndarray:
    """
    Single direct path H = β a_rx(AoA) a_tx(AoD)*.

    β has unit magnitude and a phase uniform on [0, 2π).
    """
    _require_arrays(ctx)
    if spec.los_aod is None or spec.los_aoa is None:
        raise ChannelError("LOS channel requires both los_aod and los_aoa")
    beta = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    a_rx = ctx.rx_array.array_response(spec.los_aoa)
    a_tx = ctx.tx_array.array_response(spec.los_aod)
    return beta * np.outer(a_rx, a_tx.conj())


def rician_weights(kappa: float) -> tuple[float, float]:
    """Amplitude weights of the LOS and Rayleigh parts; their squares sum to 1."""
    return math.sqrt(kappa / (kappa + 1.0)), math.sqrt(1.0 / (kappa + 1.0))


def realize_rician(
    spec: ChannelSpec, ctx: PropagationContext, rng: np.random.Generator
) -> np.ndarray:
    """
    Mixture of a LOS and a Rayleigh channel weighted by the Rician factor.

    The LOS part is drawn first, from the spec's angles when given and from
    uniformly drawn angles otherwise, then the Rayleigh part.
    """
    if spec.rician_kappa is None:
        raise ChannelError("Rician channel requires rician_kappa")
    if spec.rician_kappa < 0:
        raise ChannelError(f"Rician factor must be non-negative, got {spec.rician_kappa}")
    los_spec = spec
    if spec.los_aod is None or spec.los_aoa is None:
        los_spec = spec.model_copy(
            update={"los_aod": _uniform_direction(rng), "los_aoa": _uniform_direction(rng)}
        )
    h_los = realize_los(los_spec, ctx, rng)
    h_ray = realize_rayleigh(ctx, rng)
    w_los, w_ray = rician_weights(spec.rician_kappa)
    return w_los * h_los + w_ray * h_ray


def realize_ray_cluster(
    spec: ChannelSpec, ctx: PropagationContext, rng: np.random.Generator
) -> np.ndarray:
    """
    Clusters of discrete rays, each with a CN(0, 1) gain.

    Cluster centers are uniform over the full azimuth/elevation ranges; ray
    angles are Laplacian offsets around the center with scale `angle_spread`,
    clipped to the valid ranges.
    """
    _require_arrays(ctx)
    if spec.num_clusters is None or spec.num_rays is None:
        raise ChannelError("Ray-cluster channel requires num_clusters and num_rays")
    num_clusters, num_rays = spec.num_clusters, spec.num_rays
    h = np.zeros((ctx.num_rx, ctx.num_tx), dtype=complex)
    for _ in range(num_clusters):
        aoa_center = _uniform_direction(rng)
        aod_center = _uniform_direction(rng)
        for _ in range(num_rays):
            aoa = _offset_direction(aoa_center, spec.angle_spread, rng)
            aod = _offset_direction(aod_center, spec.angle_spread, rng)
            beta = _complex_normal(rng, ())
            h += beta * np.outer(
                ctx.rx_array.array_response(aoa), ctx.tx_array.array_response(aod).conj()
            )
    return h / math.sqrt(num_clusters * num_rays)


def element_positions(array: ArrayGeometry, origin, wavelength: float) -> np.ndarray:
    """Absolute element positions in meters: array coordinates scaled by λ, offset by `origin`."""
    return np.asarray(origin, dtype=float).reshape(1, 3) + array.elements * wavelength


def realize_spherical(
    ctx: PropagationContext, tx_origin=(0.0, 0.0, 0.0), rx_origin=(0.0, 0.0, 0.0)
) -> np.ndarray:
    """
    Deterministic near-field channel [H]_{v,u} = (γ / r_uv) exp(-j2π r_uv / λ).

    γ is chosen so that ||H||_F^2 = Nt*Nr exactly.

    Raises:
        ChannelError: If a transmit and a receive element coincide.
    """
    _require_arrays(ctx)
    wavelength = ctx.carrier_wavelength
    tx = element_positions(ctx.tx_array, tx_origin, wavelength)
    rx = element_positions(ctx.rx_array, rx_origin, wavelength)
    distances = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    if np.any(distances == 0.0):
        raise ChannelError("Spherical-wave channel with coincident transmit/receive elements")
    gamma = math.sqrt(ctx.num_tx * ctx.num_rx / np.sum(distances**-2.0))
    return gamma / distances * np.exp(-1j * 2.0 * np.pi * distances / wavelength)


def enforce_normalization(h: np.ndarray, target_energy: float) -> np.ndarray:
    """Scales `h` so that its squared Frobenius norm equals `target_energy`."""
    energy = float(np.sum(np.abs(h) ** 2))
    if energy == 0.0:
        raise ChannelError("Cannot normalize an all-zero channel matrix")
    return h * math.sqrt(target_energy / energy)


ChannelRealizer = Callable[..., np.ndarray]

CHANNEL_MODELS: dict[ChannelModel, ChannelRealizer] = {
    ChannelModel.RAYLEIGH: lambda spec, ctx, rng, tx_origin, rx_origin: realize_rayleigh(ctx, rng),
    ChannelModel.LOS: lambda spec, ctx, rng, tx_origin, rx_origin: realize_los(spec, ctx, rng),
    ChannelModel.RICIAN: lambda spec, ctx, rng, tx_origin, rx_origin: realize_rician(spec, ctx, rng),
    ChannelModel.RAY_CLUSTER: lambda spec, ctx, rng, tx_origin, rx_origin: realize_ray_cluster(
        spec, ctx, rng
    ),
    ChannelModel.SPHERICAL_WAVE: lambda spec, ctx, rng, tx_origin, rx_origin: realize_spherical(
        ctx, tx_origin, rx_origin
    ),
}


def realize(
    spec: ChannelSpec,
    ctx: PropagationContext,
    rng: np.random.Generator,
    tx_origin=(0.0, 0.0, 0.0),
    rx_origin=(0.0, 0.0, 0.0),
) -> ChannelRealization:
    """
    Draws one channel realization for `spec` between the context's arrays.

    Args:
        spec (ChannelSpec): Model and model parameters.
        ctx (PropagationContext): Carrier, velocity and the two arrays.
        rng (numpy.random.Generator): Source of every random draw.
        tx_origin, rx_origin: Device positions in meters (spherical-wave only).

    Returns:
        ChannelRealization: The Nr x Nt matrix, strictly normalized when requested.

    Raises:
        ChannelError: For unsupported models or missing model parameters.
    """
    realizer = CHANNEL_MODELS.get(spec.model)
    if realizer is None:
        raise ChannelError(f"Unsupported channel model '{spec.model}'")
    h = realizer(spec, ctx, rng, tx_origin, rx_origin)
    if spec.force_normalization:
        target = spec.normalized_energy or float(ctx.num_tx * ctx.num_rx)
        h = enforce_normalization(h, target)
    logger.debug("Realized %s channel of shape %s", spec.model.value, h.shape)
    return ChannelRealization(matrix=h)
