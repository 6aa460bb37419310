"""Secrecy-rate maximization by non-constrained optimum approaching.

At full power the secrecy rate of a unit-norm beamformer ``w`` is
``log2(1 + w^H A w / w^H B w)`` with::

    A = a_b^2 h_b h_b^H - a_e^2 h_e h_e^H
    B = (noise / power) I + a_e^2 h_e h_e^H

``B^{-1/2} A B^{-1/2}`` has rank two, so its nonzero spectrum lives in
``span{B^{-1/2} h_b, B^{-1/2} h_e}``. Everything here works on that
subspace and on rank-one updates of the identity; no ``n_t x n_t`` matrix is
ever formed.

With two or more RF chains the unconstrained optimum is realized exactly by a
pair of phase-only columns. With a single RF chain the analog phases are
improved by fixed-step gradient ascent.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import FieldModel, LinkBudget, channel_vector, path_gain
from .geometry import ReceiverLocation, UpaGeometry

log = logging.getLogger(__name__)

# Relative size of the component of B^{-1/2} h_e orthogonal to B^{-1/2} h_b
# below which the two channels are treated as parallel.
DEGENERACY_TOL = 1e-10


class InfeasibleError(ValueError):
    """Some entries of the target beamformer exceed the two-chain magnitude cap."""

    def __init__(self, indices: np.ndarray, cap: float):
        self.indices = np.asarray(indices)
        self.cap = cap
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = "" if self.indices.size <= 10 else f" (+{self.indices.size - 10} more)"
        super().__init__(
            f"{self.indices.size} entries exceed |w_i| <= {cap:.6g}: indices {shown}{more}"
        )


class NcoaMode(enum.Enum):
    HYBRID_CLOSED_FORM = "hybrid"
    FULLY_ANALOG_GD = "fully-analog"


@dataclass(frozen=True)
class WiretapOperators:
    h_b: np.ndarray
    h_e: np.ndarray
    a_b: float
    a_e: float
    noise_over_power: float

    def __post_init__(self):
        if self.h_b.shape != self.h_e.shape or self.h_b.ndim != 1:
            raise ValueError("Bob and Eve channels must be vectors of equal length")
        if not (math.isfinite(self.noise_over_power) and self.noise_over_power > 0):
            raise ValueError(f"noise-to-power ratio must be finite and > 0, got {self.noise_over_power}")

    @property
    def n_t(self) -> int:
        return self.h_b.size

    @property
    def _eve_weight(self) -> float:
        # B's eigenvalue along h_e is noise_over_power + a_e^2 ||h_e||^2.
        return self.a_e**2 * np.vdot(self.h_e, self.h_e).real

    def apply_a(self, x: np.ndarray) -> np.ndarray:
        return self.a_b**2 * self.h_b * np.vdot(self.h_b, x) - self.a_e**2 * self.h_e * np.vdot(self.h_e, x)

    def apply_b(self, x: np.ndarray) -> np.ndarray:
        return self.noise_over_power * x + self.a_e**2 * self.h_e * np.vdot(self.h_e, x)

    def _apply_b_power(self, x: np.ndarray, power: float) -> np.ndarray:
        b0 = self.noise_over_power
        hh = np.vdot(self.h_e, self.h_e).real
        if hh == 0.0:
            return b0**power * x
        gamma = ((b0 + self._eve_weight) / b0) ** power - 1.0
        return b0**power * (x + gamma * self.h_e * (np.vdot(self.h_e, x) / hh))

    def apply_b_inv_sqrt(self, x: np.ndarray) -> np.ndarray:
        return self._apply_b_power(np.asarray(x, dtype=complex), -0.5)

    def apply_b_sqrt(self, x: np.ndarray) -> np.ndarray:
        return self._apply_b_power(np.asarray(x, dtype=complex), 0.5)


def build_wiretap_operators(
    geom: UpaGeometry,
    loc_b: ReceiverLocation,
    loc_e: ReceiverLocation,
    budget: LinkBudget,
    mode: FieldModel = FieldModel.EXACT,
) -> WiretapOperators:
    if not budget.tx_power_w > 0:
        raise ValueError("transmit power must be positive to form the wiretap quotient")
    return WiretapOperators(
        h_b=channel_vector(geom, loc_b, mode).entries,
        h_e=channel_vector(geom, loc_e, mode).entries,
        a_b=path_gain(geom.carrier_hz, loc_b.range_m),
        a_e=path_gain(geom.carrier_hz, loc_e.range_m),
        noise_over_power=budget.noise_over_power,
    )


def apply_b_inv_sqrt(ops: WiretapOperators, x: np.ndarray) -> np.ndarray:
    return ops.apply_b_inv_sqrt(x)


@dataclass(frozen=True)
class EigenPair2:
    """The two nonzero eigenpairs of ``B^{-1/2} A B^{-1/2}``.

    When Bob's and Eve's whitened channels are parallel only one eigenvalue
    is nonzero; the other slot then holds 0 with an arbitrary orthogonal
    vector and ``degenerate`` is set.
    """

    lambda_a: float
    lambda_b: float
    v_a: np.ndarray
    v_b: np.ndarray
    degenerate: bool = False


def _orthogonal_unit(q: np.ndarray) -> np.ndarray:
    # Alternating signs keep the filler direction spread over all antennas, so
    # that the resulting beamformer stays realizable with phase shifters.
    e = q * np.where(np.arange(q.size) % 2 == 0, 1.0, -1.0)
    e = e - q * np.vdot(q, e)
    return e / np.linalg.norm(e)


def reduced_eigensolve(ops: WiretapOperators) -> EigenPair2:
    u_b = ops.apply_b_inv_sqrt(ops.h_b)
    u_e = ops.apply_b_inv_sqrt(ops.h_e)
    q1 = u_b / np.linalg.norm(u_b)
    r = u_e - q1 * np.vdot(q1, u_e)
    r = r - q1 * np.vdot(q1, r)
    r_norm = np.linalg.norm(r)

    if r_norm <= DEGENERACY_TOL * np.linalg.norm(u_e):
        mu = ops.a_b**2 * np.vdot(u_b, u_b).real - ops.a_e**2 * abs(np.vdot(q1, u_e)) ** 2
        if ops.n_t == 1:
            return EigenPair2(float(mu), float(mu), q1, q1, degenerate=True)
        perp = _orthogonal_unit(q1)
        if mu >= 0:
            return EigenPair2(float(mu), 0.0, q1, perp, degenerate=True)
        return EigenPair2(0.0, float(mu), perp, q1, degenerate=True)

    q2 = r / r_norm
    cb = np.array([np.linalg.norm(u_b), 0.0], dtype=complex)
    ce = np.array([np.vdot(q1, u_e), r_norm], dtype=complex)
    m = ops.a_b**2 * np.outer(cb, cb.conj()) - ops.a_e**2 * np.outer(ce, ce.conj())
    vals, vecs = np.linalg.eigh(m)
    basis = np.stack([q1, q2], axis=1)
    v_b, v_a = basis @ vecs[:, 0], basis @ vecs[:, 1]
    return EigenPair2(float(vals[1]), float(vals[0]), v_a / np.linalg.norm(v_a), v_b / np.linalg.norm(v_b))


def whitened_direction(ops: WiretapOperators, v: np.ndarray) -> np.ndarray:
    """Unit vector along ``B^{-1/2} v``."""
    x = ops.apply_b_inv_sqrt(v)
    return x / np.linalg.norm(x)


def nonconstrained_optimum(ops: WiretapOperators, pair: EigenPair2) -> np.ndarray:
    return whitened_direction(ops, pair.v_a)


def rayleigh_quotient(ops: WiretapOperators, w: np.ndarray) -> float:
    w = np.asarray(w)
    if not np.any(w):
        raise ValueError("Rayleigh quotient is undefined for the zero vector")
    g_b = abs(np.vdot(ops.h_b, w)) ** 2
    g_e = abs(np.vdot(ops.h_e, w)) ** 2
    num = ops.a_b**2 * g_b - ops.a_e**2 * g_e
    den = ops.noise_over_power * np.vdot(w, w).real + ops.a_e**2 * g_e
    return float(num / den)


def eigen_decomposed_quotient(ops: WiretapOperators, pair: EigenPair2, w: np.ndarray) -> float:
    """The same quotient written as ``lambda_a |<w', v_a>|^2 + lambda_b |<w', v_b>|^2``."""
    wp = ops.apply_b_sqrt(w)
    wp = wp / np.linalg.norm(wp)
    return float(pair.lambda_a * abs(np.vdot(pair.v_a, wp)) ** 2 + pair.lambda_b * abs(np.vdot(pair.v_b, wp)) ** 2)


def secrecy_rate_from_quotient(lambda_sigma: float) -> float:
    return math.log2(1.0 + lambda_sigma) if lambda_sigma > 0 else 0.0


@dataclass(frozen=True)
class HybridBeamformer:
    analog_phases: np.ndarray  # (n_t, n_rf) radians
    digital: np.ndarray  # (n_rf,)

    @property
    def n_t(self) -> int:
        return self.analog_phases.shape[0]

    @property
    def n_rf(self) -> int:
        return self.analog_phases.shape[1]

    @property
    def analog(self) -> np.ndarray:
        return np.exp(1j * self.analog_phases) / math.sqrt(self.n_t)

    @property
    def weights(self) -> np.ndarray:
        return self.analog @ self.digital


def hybrid_decompose(w: np.ndarray, n_rf: int = 2, on_infeasible: str = "raise") -> tuple[HybridBeamformer, float]:
    """Realize ``w`` with two phase-only RF chains.

    Entry ``i`` is split into two unit phasors at ``angle(w_i) +/- delta_i``
    with ``delta_i = arccos(sqrt(n_t / 2) |w_i|)``; combined with digital
    weights ``(1, 1) / sqrt(2)`` they reproduce ``w_i``. Extra chains get zero
    digital weight.

    ``on_infeasible`` controls entries above the cap ``sqrt(2 / n_t)``:
    ``"raise"`` reports them, ``"clip"`` clips their magnitude and renormalizes
    through the digital weights, ``"rescale"`` enlarges the digital weights so
    the reconstruction stays exact.

    Returns the beamformer and ``||P_A P_D - w||``.
    """
    if n_rf < 2:
        raise ValueError(f"closed-form hybrid realization needs n_rf >= 2, got {n_rf}")
    w = np.asarray(w, dtype=complex)
    n_t = w.size
    cap = math.sqrt(2.0 / n_t)
    mags = np.abs(w)
    over = np.flatnonzero(mags > cap * (1.0 + 1e-12))
    scale = 1.0
    if over.size:
        if on_infeasible == "raise":
            raise InfeasibleError(over + 1, cap)
        if on_infeasible == "clip":
            mags = np.minimum(mags, cap)
            scale = 1.0 / np.linalg.norm(mags)
        elif on_infeasible == "rescale":
            scale = float(mags.max() / cap)
            mags = mags / scale
        else:
            raise ValueError(f"unknown on_infeasible policy {on_infeasible!r}")
        log.warning("%d entries exceed the two-chain cap; applied %r", over.size, on_infeasible)

    delta = np.arccos(np.clip(mags / cap, 0.0, 1.0))
    angle = np.angle(w)
    phases = np.zeros((n_t, n_rf))
    phases[:, 0] = np.mod(angle + delta, 2 * math.pi)
    phases[:, 1] = np.mod(angle - delta, 2 * math.pi)
    digital = np.zeros(n_rf, dtype=complex)
    digital[:2] = scale / math.sqrt(2.0)
    bf = HybridBeamformer(phases, digital)
    return bf, float(np.linalg.norm(bf.weights - w))


@dataclass(frozen=True)
class NcoaConfig:
    step_rad: float = 10.0
    convergence_threshold: float = 0.003
    max_iterations: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        if not self.step_rad > 0:
            raise ValueError(f"step must be positive, got {self.step_rad}")
        if not self.convergence_threshold > 0:
            raise ValueError(f"convergence threshold must be positive, got {self.convergence_threshold}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class NcoaResult:
    beamformer: HybridBeamformer
    lambda_sigma: float
    secrecy_rate_bps_hz: float
    iterations: int
    converged: bool
    mode: NcoaMode
    lambda_a: float
    lambda_b: float
    tx_power_w: float = float("nan")
    reconstruction_error: float = 0.0
    # Quotient after each fully-analog iteration, starting at the random initial point.
    trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def weights(self) -> np.ndarray:
        return self.beamformer.weights


class _AnalogSurrogate:
    """``sum_k lambda_k |(v_k^B)^H w(phi)|^2`` for ``w(phi) = exp(j phi) / sqrt(n_t)``.

    ``v_k^B`` are the whitened eigen-directions. This is the objective whose
    phase gradient drives the single-chain ascent; it coincides with the
    quotient at the unconstrained optimum.
    """

    def __init__(self, ops: WiretapOperators, pair: EigenPair2):
        self.n_t = ops.n_t
        self.lambdas = np.array([pair.lambda_a, pair.lambda_b])
        self.dirs = np.stack([whitened_direction(ops, pair.v_a), whitened_direction(ops, pair.v_b)])

    def weights(self, phases: np.ndarray) -> np.ndarray:
        return np.exp(1j * phases) / math.sqrt(self.n_t)

    def value_and_gradient(self, phases: np.ndarray) -> tuple[float, np.ndarray]:
        w = self.weights(phases)
        coeff = self.dirs.conj() @ w
        value = float(np.sum(self.lambdas * np.abs(coeff) ** 2))
        # d|c_k|^2/dphi_i = 2 Re(conj(c_k) conj(v_ki) j w_i)
        terms = (self.lambdas * coeff.conj())[:, None] * self.dirs.conj() * w[None, :]
        grad = -2.0 * np.imag(terms.sum(axis=0))
        return value, grad


def fa_objective(ops: WiretapOperators, phases: np.ndarray, pair: EigenPair2 | None = None) -> float:
    pair = pair or reduced_eigensolve(ops)
    return _AnalogSurrogate(ops, pair).value_and_gradient(np.asarray(phases, dtype=float))[0]


def fa_gradient(ops: WiretapOperators, phases: np.ndarray, pair: EigenPair2 | None = None) -> np.ndarray:
    pair = pair or reduced_eigensolve(ops)
    return _AnalogSurrogate(ops, pair).value_and_gradient(np.asarray(phases, dtype=float))[1]


def phase_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def fa_descend(
    ops: WiretapOperators,
    cfg: NcoaConfig,
    pair: EigenPair2 | None = None,
    stream: int = 0,
    initial_phases: np.ndarray | None = None,
    record_trace: bool = False,
) -> NcoaResult:
    """Single-RF-chain design: fixed-step ascent over the analog phases.

    Stops when the relative change of the ascended objective drops below
    ``cfg.convergence_threshold`` and returns the last iterate.
    """
    pair = pair or reduced_eigensolve(ops)
    sur = _AnalogSurrogate(ops, pair)
    if initial_phases is None:
        phases = phase_rng(cfg.rng_seed, stream).uniform(0.0, 2 * math.pi, ops.n_t)
    else:
        phases = np.array(initial_phases, dtype=float)

    value, grad = sur.value_and_gradient(phases)
    trace = [rayleigh_quotient(ops, sur.weights(phases))] if record_trace else []
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        phases = phases + cfg.step_rad * grad
        iterations += 1
        new_value, grad = sur.value_and_gradient(phases)
        if record_trace:
            trace.append(rayleigh_quotient(ops, sur.weights(phases)))
        change = abs(new_value - value)
        scale = abs(value) if abs(value) >= 1e-12 else 1.0
        value = new_value
        if change < cfg.convergence_threshold * scale:
            converged = True
            break
    if not converged:
        log.info("fully-analog ascent hit max_iterations=%d", cfg.max_iterations)

    phases = np.mod(phases, 2 * math.pi)
    bf = HybridBeamformer(phases[:, None], np.ones(1, dtype=complex))
    lam = rayleigh_quotient(ops, bf.weights)
    return NcoaResult(
        beamformer=bf,
        lambda_sigma=lam,
        secrecy_rate_bps_hz=secrecy_rate_from_quotient(lam),
        iterations=iterations,
        converged=converged,
        mode=NcoaMode.FULLY_ANALOG_GD,
        lambda_a=pair.lambda_a,
        lambda_b=pair.lambda_b,
        trace=tuple(trace),
    )


def hybrid_solve(ops: WiretapOperators, n_rf: int = 2, pair: EigenPair2 | None = None, on_infeasible: str = "raise") -> NcoaResult:
    pair = pair or reduced_eigensolve(ops)
    w_opt = nonconstrained_optimum(ops, pair)
    bf, err = hybrid_decompose(w_opt, n_rf, on_infeasible)
    lam = rayleigh_quotient(ops, bf.weights)
    return NcoaResult(
        beamformer=bf,
        lambda_sigma=lam,
        secrecy_rate_bps_hz=secrecy_rate_from_quotient(lam),
        iterations=0,
        converged=True,
        mode=NcoaMode.HYBRID_CLOSED_FORM,
        lambda_a=pair.lambda_a,
        lambda_b=pair.lambda_b,
        reconstruction_error=err,
    )


def ncoa(
    geom: UpaGeometry,
    loc_b: ReceiverLocation,
    loc_e: ReceiverLocation,
    budget: LinkBudget,
    n_rf: int,
    cfg: NcoaConfig = NcoaConfig(),
    mode: FieldModel = FieldModel.EXACT,
    on_infeasible: str = "raise",
    stream: int = 0,
    record_trace: bool = False,
) -> NcoaResult:
    """Design the transmit beamformer for Bob given Eve's (estimated) location."""
    if n_rf < 1:
        raise ValueError(f"n_rf must be >= 1, got {n_rf}")
    ops = build_wiretap_operators(geom, loc_b, loc_e, budget, mode)
    pair = reduced_eigensolve(ops)
    if n_rf >= 2:
        result = hybrid_solve(ops, n_rf, pair, on_infeasible)
    else:
        result = fa_descend(ops, cfg, pair, stream=stream, record_trace=record_trace)
    return replace(result, tx_power_w=budget.tx_power_w)
