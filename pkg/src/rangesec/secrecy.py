"""Secrecy-rate formulas for the single-antenna Bob/Eve wiretap link.

Rates are in bps/Hz (base-2 logarithms) and clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelVector,
    FieldModel,
    LinkBudget,
    beamforming_gain,
    channel_vector,
    path_gain,
    received_snr,
)
from .geometry import ReceiverLocation, UpaGeometry


@dataclass(frozen=True)
class SecrecyReport:
    rate_bps_hz: float
    snr_bob: float
    snr_eve: float
    clamped: bool


def shannon_capacity(snr: float) -> float:
    if snr < 0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    return math.log2(1.0 + snr)


def clamped_difference(snr_bob: float, snr_eve: float) -> SecrecyReport:
    raw = math.log2(1.0 + snr_bob) - math.log2(1.0 + snr_eve)
    return SecrecyReport(max(0.0, raw), snr_bob, snr_eve, raw < 0.0)


def secrecy_rate(
    w: np.ndarray,
    h_b: ChannelVector | np.ndarray,
    h_e: ChannelVector | np.ndarray,
    alpha_b: float,
    alpha_e: float,
    budget: LinkBudget,
) -> SecrecyReport:
    snr_b = received_snr(budget, beamforming_gain(w, h_b), alpha_b)
    snr_e = received_snr(budget, beamforming_gain(w, h_e), alpha_e)
    return clamped_difference(snr_b, snr_e)


def farfield_secrecy_capacity_bound(n_t: int, alpha_b: float, alpha_e: float, budget: LinkBudget) -> float:
    """Best rate any array can reach when Bob and Eve share a far-field direction.

    Both receivers see the same combined wavefront, whose power is at most
    ``n_t`` times the per-antenna power.
    """
    return clamped_difference(
        received_snr(budget, n_t, alpha_b), received_snr(budget, n_t, alpha_e)
    ).rate_bps_hz


def traditional_baseline(
    geom: UpaGeometry,
    loc_b: ReceiverLocation,
    loc_e: ReceiverLocation,
    budget: LinkBudget,
    mode: FieldModel = FieldModel.EXACT,
) -> SecrecyReport:
    """Conventional beam steering toward Bob's direction, scored on the configured channels.

    The beamformer is the plane-wave matched filter for Bob's angle, which is
    what a far-field design would use regardless of range.
    """
    steer = channel_vector(geom, loc_b, FieldModel.FAR_FIELD).entries
    w = steer / np.linalg.norm(steer)
    h_b = channel_vector(geom, loc_b, mode)
    h_e = channel_vector(geom, loc_e, mode)
    return secrecy_rate(
        w,
        h_b,
        h_e,
        path_gain(geom.carrier_hz, loc_b.range_m),
        path_gain(geom.carrier_hz, loc_e.range_m),
        budget,
    )
