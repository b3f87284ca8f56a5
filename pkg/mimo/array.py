"""
Antenna array geometry and numerically computed array responses.

Element coordinates are stored in carrier wavelengths, so an array is
agnostic of the carrier it is eventually used at. Directions follow the
azimuth-elevation convention: azimuth is measured from the +y axis towards
+x, elevation from the xy-plane towards +z.
"""

import logging
import math
from typing import Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from mimo.errors import GeometryError

logger = logging.getLogger(__name__)

HALF_WAVELENGTH = 0.5


class Direction(BaseModel):
    azimuth: float = Field(0.0, ge=-math.pi, le=math.pi)
    elevation: float = Field(0.0, ge=-math.pi / 2, le=math.pi / 2)


def sph_to_cart(r: float, direction: Direction) -> tuple[float, float, float]:
    """
    Converts a length along an azimuth-elevation direction into Cartesian components.

    Args:
        r (float): Non-negative length (meters or wavelengths, the unit is carried through).
        direction (Direction): Azimuth/elevation in radians.

    Returns:
        tuple: (x, y, z) = (r sinθ cosφ, r cosθ cosφ, r sinφ).

    Raises:
        GeometryError: If r is negative.
    """
    if r < 0:
        raise GeometryError(f"Length must be non-negative, got {r}")
    theta, phi = direction.azimuth, direction.elevation
    return (
        r * math.sin(theta) * math.cos(phi),
        r * math.cos(theta) * math.cos(phi),
        r * math.sin(phi),
    )


def cart_to_sph(x: float, y: float, z: float) -> tuple[float, Direction]:
    """
    Inverse of `sph_to_cart` using four-quadrant arctangents.

    The origin maps to r = 0 with azimuth and elevation both 0.
    """
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        return 0.0, Direction()
    azimuth = math.atan2(x, y)
    elevation = math.atan2(z, math.hypot(x, y))
    return r, Direction(azimuth=azimuth, elevation=elevation)


def _unit_direction(direction: Direction) -> np.ndarray:
    return np.array(sph_to_cart(1.0, direction))


def _rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class ArrayGeometry(BaseModel):
    """
    An arbitrary 3-D array: an (Na, 3) coordinate matrix in wavelengths and one
    complex weight per element.

    Instances are values. Every modifier returns a new geometry.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    elements: np.ndarray = Field(default_factory=lambda: np.zeros((0, 3)))
    weights: Optional[np.ndarray] = Field(default=None, validate_default=True)

    @field_validator("elements", mode="before")
    @classmethod
    def coerce_elements(cls, value):
        elements = np.asarray(value, dtype=float)
        if elements.size == 0:
            return np.zeros((0, 3))
        elements = np.atleast_2d(elements)
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise GeometryError(
                f"Element coordinates must have shape (N, 3), got {elements.shape}"
            )
        if not np.all(np.isfinite(elements)):
            raise GeometryError("Element coordinates must be finite")
        return elements

    @field_validator("weights", mode="before")
    @classmethod
    def coerce_weights(cls, value, info: ValidationInfo):
        if value is None:
            elements = info.data.get("elements")
            return np.ones(0 if elements is None else len(elements), dtype=complex)
        return np.asarray(value, dtype=complex).reshape(-1)

    @model_validator(mode="after")
    def check_weights(self):
        if len(self.weights) != len(self.elements):
            raise GeometryError(
                f"Expected {len(self.elements)} weights, got {len(self.weights)}"
            )
        return self

    @property
    def num_elements(self) -> int:
        return int(self.elements.shape[0])

    def add_element(self, x, y, z) -> "ArrayGeometry":
        """Appends one or more elements (vectors of coordinates are accepted); new weights are 1."""
        new = np.column_stack(
            [np.atleast_1d(np.asarray(c, dtype=float)) for c in (x, y, z)]
        )
        return ArrayGeometry(
            elements=np.vstack([self.elements, new]),
            weights=np.concatenate([self.weights, np.ones(len(new), dtype=complex)]),
        )

    def remove_element(self, index: Optional[int] = None) -> "ArrayGeometry":
        """Removes the element at `index`, the last one when no index is given."""
        if self.num_elements == 0:
            raise GeometryError("Cannot remove an element from an empty array")
        if index is None:
            index = self.num_elements - 1
        if not -self.num_elements <= index < self.num_elements:
            raise GeometryError(
                f"Element index {index} out of range for {self.num_elements} elements"
            )
        return ArrayGeometry(
            elements=np.delete(self.elements, index, axis=0),
            weights=np.delete(self.weights, index),
        )

    def translate(
        self,
        x: Optional[float] = None,
        y: Optional[float] = None,
        z: Optional[float] = None,
    ) -> "ArrayGeometry":
        """Shifts every element by (x, y, z) wavelengths; with no arguments centers the centroid at the origin."""
        if x is None and y is None and z is None:
            if self.num_elements == 0:
                return self
            shift = -self.elements.mean(axis=0)
        else:
            shift = np.array([x or 0.0, y or 0.0, z or 0.0])
        return ArrayGeometry(elements=self.elements + shift, weights=self.weights)

    def rotate(
        self, theta_x: float = 0.0, theta_y: float = 0.0, theta_z: float = 0.0
    ) -> "ArrayGeometry":
        """Rotates about the x axis, then y, then z (right-handed, radians)."""
        rotation = _rotation_z(theta_z) @ _rotation_y(theta_y) @ _rotation_x(theta_x)
        return ArrayGeometry(elements=self.elements @ rotation.T, weights=self.weights)

    def set_weights(self, weights) -> "ArrayGeometry":
        return ArrayGeometry(elements=self.elements, weights=weights)

    def _require_elements(self):
        if self.num_elements == 0:
            raise GeometryError("Array has no elements")

    def array_response(self, direction: Direction) -> np.ndarray:
        """
        Receive-convention response exp(+j2πζ) referenced to the first element.

        The vector is not normalized: every entry has unit magnitude and the
        first entry is exactly 1.
        """
        self._require_elements()
        zeta = self.elements @ _unit_direction(direction)
        return np.exp(1j * 2.0 * np.pi * (zeta - zeta[0]))

    def weighted_array_response(self, direction: Direction) -> np.ndarray:
        return self.array_response(direction) * self.weights

    def array_gain(self, direction: Direction) -> complex:
        """g(θ, φ) = wᵀa(θ, φ); the weights are applied as is, not conjugated."""
        return complex(np.sum(self.weighted_array_response(direction)))

    def pattern_cut(
        self, cut: Literal["azimuth", "elevation"] = "azimuth", samples: int = 361
    ) -> list[tuple[float, complex]]:
        """
        Samples the array gain on a uniform grid spanning one angle's full range
        with the other angle held at 0.

        Returns:
            list: (angle, complex gain) pairs, endpoints included.
        """
        if samples < 2:
            raise GeometryError(f"A pattern cut needs at least 2 samples, got {samples}")
        if cut == "azimuth":
            angles = np.linspace(-math.pi, math.pi, samples)
            directions = [Direction(azimuth=float(a)) for a in angles]
        elif cut == "elevation":
            angles = np.linspace(-math.pi / 2, math.pi / 2, samples)
            directions = [Direction(elevation=float(a)) for a in angles]
        else:
            raise GeometryError(f"Unknown pattern cut '{cut}'")
        return [(float(a), self.array_gain(d)) for a, d in zip(angles, directions)]


def make_ula(n: int, axis: Literal["x", "y", "z"] = "x") -> ArrayGeometry:
    """Half-wavelength uniform linear array along `axis`, first element at the origin."""
    if n < 0:
        raise GeometryError(f"Element count must be non-negative, got {n}")
    column = {"x": 0, "y": 1, "z": 2}.get(axis)
    if column is None:
        raise GeometryError(f"Unknown axis '{axis}'")
    elements = np.zeros((n, 3))
    elements[:, column] = HALF_WAVELENGTH * np.arange(n)
    return ArrayGeometry(elements=elements)


def make_upa(m: int, n: int, plane: Literal["xz", "xy", "yz"] = "xz") -> ArrayGeometry:
    """
    Half-wavelength uniform planar array with `m` rows of `n` elements.

    Columns run along the first axis of `plane` and rows along the second.
    Elements are ordered row-major: all columns of row 0, then row 1, and so on.
    """
    if m < 0 or n < 0:
        raise GeometryError(f"Row/column counts must be non-negative, got {m}x{n}")
    axes = {"xz": (0, 2), "xy": (0, 1), "yz": (1, 2)}.get(plane)
    if axes is None:
        raise GeometryError(f"Unknown plane '{plane}'")
    rows, cols = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    elements = np.zeros((m * n, 3))
    elements[:, axes[0]] = HALF_WAVELENGTH * cols.reshape(-1)
    elements[:, axes[1]] = HALF_WAVELENGTH * rows.reshape(-1)
    logger.debug("Built %dx%d UPA in the %s plane", m, n, plane)
    return ArrayGeometry(elements=elements)
