"""Line-of-sight channel: Friis gain, steering vectors and link-budget arithmetic."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    ReceiverLocation,
    UpaGeometry,
    exact_residuals,
    farfield_residuals,
)


class FieldModel(enum.Enum):
    EXACT = "exact"
    FAR_FIELD = "far"


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    mode: FieldModel

    @property
    def n_t(self) -> int:
        return self.entries.size


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and receiver noise power, both in watts."""

    tx_power_w: float
    noise_w: float

    def __post_init__(self):
        if not (math.isfinite(self.tx_power_w) and self.tx_power_w >= 0):
            raise ValueError(f"transmit power must be finite and >= 0, got {self.tx_power_w}")
        if not (math.isfinite(self.noise_w) and self.noise_w > 0):
            raise ValueError(f"noise power must be finite and > 0, got {self.noise_w}")

    @classmethod
    def from_dbm(cls, tx_power_dbm: float, noise_dbm: float) -> "LinkBudget":
        return cls(dbm_to_watts(tx_power_dbm), dbm_to_watts(noise_dbm))

    @property
    def noise_over_power(self) -> float:
        return self.noise_w / self.tx_power_w


def path_gain(carrier_hz: float, range_m: float) -> float:
    """Free-space amplitude gain c / (4 pi f r)."""
    if not carrier_hz > 0 or not range_m > 0:
        raise ValueError(f"carrier and range must be positive, got {carrier_hz}, {range_m}")
    return SPEED_OF_LIGHT / (4.0 * math.pi * carrier_hz * range_m)


def residuals(geom: UpaGeometry, loc: ReceiverLocation, mode: FieldModel) -> np.ndarray:
    if mode is FieldModel.EXACT:
        return exact_residuals(geom, loc)
    return farfield_residuals(geom, loc.angle_rad)


def channel_vector(geom: UpaGeometry, loc: ReceiverLocation, mode: FieldModel = FieldModel.EXACT) -> ChannelVector:
    phase = (2.0 * math.pi * geom.carrier_hz / SPEED_OF_LIGHT) * residuals(geom, loc, mode)
    return ChannelVector(np.exp(1j * phase), FieldModel(mode))


def _entries(h) -> np.ndarray:
    return h.entries if isinstance(h, ChannelVector) else np.asarray(h)


def beamforming_gain(w: np.ndarray, h: ChannelVector | np.ndarray, atol: float = 1e-9) -> float:
    """Array gain ``|w^H h|^2`` of a unit-norm beamformer."""
    w = np.asarray(w)
    norm2 = np.vdot(w, w).real
    if abs(norm2 - 1.0) > atol:
        raise ValueError(f"beamformer must have unit norm, got ||w||^2 = {norm2}")
    return float(abs(np.vdot(w, _entries(h))) ** 2)


def received_snr(budget: LinkBudget, gain: float, alpha: float) -> float:
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain}")
    return budget.tx_power_w * gain * alpha**2 / budget.noise_w


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(x_w: float) -> float:
    if not x_w > 0:
        raise ValueError(f"power must be positive to express in dBm, got {x_w}")
    return 10.0 * math.log10(x_w) + 30.0
