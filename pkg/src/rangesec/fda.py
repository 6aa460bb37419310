"""Frequency diverse arrays: the snapshot array factor and the per-symbol view.

Antenna ``i`` radiates at ``f0 + df_i``. The snapshot model
(:func:`traditional_af`, :func:`traditional_secrecy_rate`) compares Bob and Eve
at the same wall-clock time, which mixes different symbols and is kept only to
reproduce that flawed comparison. :func:`synchronized_received_amplitude`
follows one symbol from emission at ``n0 * T_s`` to each receiver; Bob and
Eve then see the same array factor up to the scalar path gain.

Sign conventions follow the transmit signal ``x_i(t) = m(t) w_i(t)
exp(-j 2 pi f_i t)`` delayed by ``r_i / c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .channel import FieldModel, LinkBudget, path_gain, received_snr, residuals
from .geometry import SPEED_OF_LIGHT, ReceiverLocation, UpaGeometry
from .secrecy import clamped_difference

MAX_RELATIVE_OFFSET = 1e-3


@dataclass(frozen=True)
class FdaConfig:
    base_geometry: UpaGeometry
    offsets_hz: np.ndarray
    symbol_time_s: float

    def __post_init__(self):
        offsets = np.asarray(self.offsets_hz, dtype=float)
        object.__setattr__(self, "offsets_hz", offsets)
        if offsets.shape != (self.base_geometry.n_t,):
            raise ValueError(f"need {self.base_geometry.n_t} frequency offsets, got shape {offsets.shape}")
        if np.max(np.abs(offsets), initial=0.0) > MAX_RELATIVE_OFFSET * self.base_geometry.carrier_hz:
            raise ValueError("frequency offsets must stay below 1e-3 of the carrier")
        if not self.symbol_time_s > 0:
            raise ValueError(f"symbol time must be positive, got {self.symbol_time_s}")

    @property
    def carrier_hz(self) -> float:
        return self.base_geometry.carrier_hz

    def without_offsets(self) -> "FdaConfig":
        return FdaConfig(self.base_geometry, np.zeros_like(self.offsets_hz), self.symbol_time_s)


def linear_chirp_offsets(n_t: int, step_hz: float) -> np.ndarray:
    """``df_i = (i - 1) * step_hz``."""
    return np.arange(n_t) * float(step_hz)


@dataclass(frozen=True)
class PrecoderSnapshot:
    """Precoder weights at one emission instant, with total power ``sum |w_i|^2``."""

    weights: np.ndarray
    power: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        object.__setattr__(self, "weights", w)
        target = float(w.size) if self.power is None else float(self.power)
        object.__setattr__(self, "power", target)
        actual = np.vdot(w, w).real
        if abs(actual - target) > 1e-9 * max(target, 1.0):
            raise ValueError(f"precoder power {actual} does not match the configured {target}")

    @classmethod
    def normalized(cls, weights: np.ndarray, power: float | None = None) -> "PrecoderSnapshot":
        w = np.asarray(weights, dtype=complex)
        target = float(w.size) if power is None else float(power)
        return cls(w * math.sqrt(target / np.vdot(w, w).real), target)


def traditional_af(cfg: FdaConfig, t_s, angle_rad: float, range_m):
    """Snapshot array factor with all-one precoding; broadcasts over ``t_s`` and ``range_m``.

    Uses the linear-array residual ``i d sin(theta)`` with the 1-based linear index.
    """
    t = np.asarray(t_s, dtype=float)
    r = np.asarray(range_m, dtype=float)
    geom = cfg.base_geometry
    i = np.arange(1, geom.n_t + 1)
    f_i = cfg.carrier_hz + cfg.offsets_hz
    static = f_i * i * geom.spacing_m * math.sin(angle_rad) / SPEED_OF_LIGHT
    retarded = (t - r / SPEED_OF_LIGHT)[..., None]
    phase = 2 * math.pi * (cfg.offsets_hz * retarded + static)
    return np.exp(1j * phase).sum(axis=-1)


def traditional_secrecy_rate(
    cfg: FdaConfig,
    t_s: float,
    angle_rad: float,
    r_b: float,
    r_e: float,
    budget: LinkBudget,
) -> float:
    """Bob-minus-Eve capacity from snapshot array factors at the same instant (unclamped)."""
    g_b = abs(traditional_af(cfg, t_s, angle_rad, r_b)) ** 2
    g_e = abs(traditional_af(cfg, t_s, angle_rad, r_e)) ** 2
    snr_b = received_snr(budget, float(g_b), path_gain(cfg.carrier_hz, r_b))
    snr_e = received_snr(budget, float(g_e), path_gain(cfg.carrier_hz, r_e))
    return math.log2(1 + snr_b) - math.log2(1 + snr_e)


def _cycles(f: float, t: float, n: int = 1) -> float:
    """Fractional part of ``f * t * n`` computed exactly from the float inputs.

    Carrier phases reach ~1e11 cycles, where a rounded float product has
    already lost the fractional cycle.
    """
    return float((Fraction(f) * Fraction(t) * n) % 1)


def symbol_steering(
    cfg: FdaConfig,
    symbol_index: int,
    loc: ReceiverLocation,
    mode: FieldModel = FieldModel.FAR_FIELD,
    keep_second_order: bool = False,
) -> np.ndarray:
    """Per-antenna factor multiplying ``w_i`` for the symbol emitted at ``n0 T_s``."""
    geom = cfg.base_geometry
    res = residuals(geom, loc, mode)
    cycles = np.array([-_cycles(df, cfg.symbol_time_s, symbol_index) for df in cfg.offsets_hz])
    cycles = cycles + cfg.carrier_hz * res / SPEED_OF_LIGHT
    if keep_second_order:
        cycles = cycles + cfg.offsets_hz * res / SPEED_OF_LIGHT
    return np.exp(2j * math.pi * cycles)


def synchronized_received_amplitude(
    cfg: FdaConfig,
    precoder: PrecoderSnapshot,
    symbol_index: int,
    loc: ReceiverLocation,
    alpha: float | None = None,
    mode: FieldModel = FieldModel.FAR_FIELD,
    keep_second_order: bool = False,
) -> complex:
    """Complex amplitude of symbol ``n0`` at the receiver, with the symbol itself factored out.

    ``alpha * exp(-j 2 pi f0 n0 T_s) * sum_i w_i exp(-j 2 pi df_i n0 T_s) exp(j 2 pi f0 L_i / c)``.
    The cross term ``df_i L_i / c`` is dropped unless ``keep_second_order``.
    """
    if alpha is None:
        alpha = path_gain(cfg.carrier_hz, loc.range_m)
    af = np.sum(precoder.weights * symbol_steering(cfg, symbol_index, loc, mode, keep_second_order))
    carrier = np.exp(-2j * math.pi * _cycles(cfg.carrier_hz, cfg.symbol_time_s, symbol_index))
    return complex(alpha * carrier * af)


def synchronized_array_factor(cfg: FdaConfig, precoder: PrecoderSnapshot, symbol_index: int, loc: ReceiverLocation, **kw) -> complex:
    return complex(np.sum(precoder.weights * symbol_steering(cfg, symbol_index, loc, **kw)))


def array_gain_bound(precoder: PrecoderSnapshot) -> float:
    """Cauchy-Schwarz cap on ``|AF|^2`` for unit-modulus steering: ``n_t * sum |w_i|^2``."""
    return precoder.weights.size * float(precoder.power)


def fda_phase_equivalence(cfg: FdaConfig) -> Callable[[np.ndarray, int], np.ndarray]:
    """Map a precoder used with frequency offsets to an equivalent single-frequency one.

    The returned function takes ``(weights, symbol_index)`` and returns
    ``weights * exp(-j 2 pi df n0 T_s)``.
    """
    offsets, ts = cfg.offsets_hz, cfg.symbol_time_s

    def mapped(weights: np.ndarray, symbol_index: int) -> np.ndarray:
        cycles = np.array([_cycles(df, ts, symbol_index) for df in offsets])
        return np.asarray(weights) * np.exp(-2j * math.pi * cycles)

    return mapped


def fda_optimal_secrecy_rate(
    cfg: FdaConfig,
    symbol_index: int,
    angle_rad: float,
    r_b: float,
    r_e: float,
    budget: LinkBudget,
) -> float:
    """Largest per-symbol secrecy rate over unit-norm precoders when Bob and Eve share a direction.

    Both receivers see the same array factor, so the rate depends on the
    precoder only through ``|AF|^2`` and is monotone in it: the optimum is
    either the matched precoder or a null toward the common direction.
    """
    loc_b = ReceiverLocation(r_b, angle_rad)
    loc_e = ReceiverLocation(r_e, angle_rad)
    steer = symbol_steering(cfg, symbol_index, loc_b)
    matched = PrecoderSnapshot(steer.conj() / np.linalg.norm(steer), 1.0)
    a_b = synchronized_received_amplitude(cfg, matched, symbol_index, loc_b)
    a_e = synchronized_received_amplitude(cfg, matched, symbol_index, loc_e)
    snr_b = budget.tx_power_w * abs(a_b) ** 2 / budget.noise_w
    snr_e = budget.tx_power_w * abs(a_e) ** 2 / budget.noise_w
    return clamped_difference(snr_b, snr_e).rate_bps_hz
