"""Uniform planar array layout and propagation-path residuals.

Antennas sit on the z = 0 plane. A receiver at range ``r`` and angle ``theta``
is located at ``(r sin(theta), 0, r cos(theta))``. Antenna ``i`` (1-based) maps
to a grid position through::

    row = (i - 1) mod n_y + 1
    col = (i - row) / n_y + 1
    position = ((row - 1) d, (col - 1) d, 0)

All lengths are meters, angles radians and frequencies Hz.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# The far-field threshold is FRAUNHOFER_FACTOR * D**2 / wavelength.
FRAUNHOFER_FACTOR = 2.0


class FieldRegion(enum.Enum):
    NEAR_FIELD = "near"
    FAR_FIELD = "far"


@dataclass(frozen=True)
class UpaGeometry:
    """Planar array of ``n_x`` antennas per row and ``n_y`` per column."""

    n_x: int
    n_y: int
    spacing_m: float
    carrier_hz: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or int(self.n_y) != self.n_y:
            raise ValueError("element counts must be integers")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError(f"element counts must be >= 1, got {self.n_x}x{self.n_y}")
        if not self.spacing_m > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing_m}")
        if not self.carrier_hz > 0:
            raise ValueError(f"carrier frequency must be positive, got {self.carrier_hz}")

    @classmethod
    def from_wavelengths(cls, n_x: int, n_y: int, spacing_lambda: float, carrier_hz: float):
        return cls(n_x, n_y, spacing_lambda * SPEED_OF_LIGHT / carrier_hz, carrier_hz)

    @property
    def n_t(self) -> int:
        return self.n_x * self.n_y

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def diagonal(self) -> float:
        """Distance between the two farthest elements."""
        return self.spacing_m * math.hypot(self.n_x - 1, self.n_y - 1)

    def row_col(self) -> tuple[np.ndarray, np.ndarray]:
        """1-based (row, col) of every antenna in linear-index order."""
        return index_to_row_col(self, np.arange(1, self.n_t + 1))

    def positions(self) -> np.ndarray:
        """(n_t, 3) array of element coordinates."""
        row, col = self.row_col()
        xyz = np.zeros((self.n_t, 3))
        xyz[:, 0] = (row - 1) * self.spacing_m
        xyz[:, 1] = (col - 1) * self.spacing_m
        return xyz


@dataclass(frozen=True)
class ReceiverLocation:
    range_m: float
    angle_rad: float

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError(f"receiver range must be positive, got {self.range_m}")
        if not -math.pi / 2 < self.angle_rad < math.pi / 2:
            raise ValueError(f"receiver angle must lie in (-pi/2, pi/2), got {self.angle_rad}")

    def cartesian(self) -> np.ndarray:
        return np.array(
            [self.range_m * math.sin(self.angle_rad), 0.0, self.range_m * math.cos(self.angle_rad)]
        )


def _check_index(geom: UpaGeometry, i):
    i = np.asarray(i)
    if np.any(i < 1) or np.any(i > geom.n_t):
        raise IndexError(f"antenna index out of range [1, {geom.n_t}]: {i}")
    return i


def index_to_row_col(geom: UpaGeometry, i):
    i = _check_index(geom, i)
    row = (i - 1) % geom.n_y + 1
    col = (i - row) // geom.n_y + 1
    return row, col


def row_col_to_index(geom: UpaGeometry, row, col):
    row, col = np.asarray(row), np.asarray(col)
    if np.any(row < 1) or np.any(row > geom.n_y) or np.any(col < 1) or np.any(col > geom.n_x):
        raise IndexError(f"(row, col) out of range for {geom.n_y}x{geom.n_x} grid")
    return (col - 1) * geom.n_y + row


def antenna_position(geom: UpaGeometry, i: int) -> tuple[float, float, float]:
    row, col = index_to_row_col(geom, i)
    return float((row - 1) * geom.spacing_m), float((col - 1) * geom.spacing_m), 0.0


def exact_residuals(geom: UpaGeometry, loc: ReceiverLocation) -> np.ndarray:
    """Spherical-wave path-length excess ``r_i - r`` for every antenna.

    Evaluated as ``(x^2 + y^2 - 2 r x sin(theta)) / (r_i + r)``, which equals
    ``r_i - r`` without the cancellation of subtracting two nearly equal ranges.
    """
    row, col = geom.row_col()
    x = (row - 1) * geom.spacing_m
    y = (col - 1) * geom.spacing_m
    r, s = loc.range_m, math.sin(loc.angle_rad)
    c = math.cos(loc.angle_rad)
    r_i = np.sqrt((r * s - x) ** 2 + y**2 + (r * c) ** 2)
    return (x * x + y * y - 2.0 * r * x * s) / (r_i + r)


def exact_residual(geom: UpaGeometry, i: int, loc: ReceiverLocation) -> float:
    return float(exact_residuals(geom, loc)[int(_check_index(geom, i)) - 1])


def farfield_residuals(geom: UpaGeometry, angle_rad: float) -> np.ndarray:
    """Plane-wave path-length excess ``-(row - 1) d sin(theta)``; range independent."""
    row, _ = geom.row_col()
    return -(row - 1) * geom.spacing_m * math.sin(angle_rad)


def farfield_residual(geom: UpaGeometry, i: int, angle_rad: float) -> float:
    return float(farfield_residuals(geom, angle_rad)[int(_check_index(geom, i)) - 1])


def fraunhofer_distance(geom: UpaGeometry, factor: float = FRAUNHOFER_FACTOR) -> float:
    return factor * geom.diagonal**2 / geom.wavelength


def classify_region(geom: UpaGeometry, range_m: float, factor: float = FRAUNHOFER_FACTOR) -> FieldRegion:
    if not range_m > 0:
        raise ValueError(f"range must be positive, got {range_m}")
    if range_m >= fraunhofer_distance(geom, factor):
        return FieldRegion.FAR_FIELD
    return FieldRegion.NEAR_FIELD
