"""Experiment configuration and the studies behind each CLI subcommand.

Each ``run_*`` function is a pure function of an :class:`ExperimentConfig`
returning ``(columns, rows, summary)``. Trials are seeded by
``(config.seed, trial_index)`` so results do not depend on worker count or
execution order.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .channel import FieldModel, LinkBudget, channel_vector, path_gain
from .fda import (
    FdaConfig,
    PrecoderSnapshot,
    array_gain_bound,
    fda_optimal_secrecy_rate,
    fda_phase_equivalence,
    linear_chirp_offsets,
    synchronized_array_factor,
    synchronized_received_amplitude,
    traditional_af,
)
from .geometry import SPEED_OF_LIGHT, ReceiverLocation, UpaGeometry
from .ncoa import (
    NcoaConfig,
    NcoaResult,
    build_wiretap_operators,
    fa_descend,
    ncoa,
    phase_rng,
    reduced_eigensolve,
)
from .secrecy import farfield_secrecy_capacity_bound, secrecy_rate, traditional_baseline


class ConfigError(ValueError):
    pass


SWEEP_PARAMETERS = ("p_tx", "spacing", "r_e", "r_b", "n_t")

DEFAULT_SWEEP_GRIDS = {
    "p_tx": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
    "spacing": [0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
    "r_e": [0.5] + [float(r) for r in range(1, 21)],
    "r_b": [float(r) for r in range(5, 21)],
    "n_t": [64, 256, 576, 1024],
}


@dataclass
class ExperimentConfig:
    # geometry
    n_x: int = 32
    n_y: int = 32
    spacing_lambda: float | None = 5.0
    spacing_m: float | None = None
    carrier_hz: float = 300e9
    fraunhofer_factor: float = 2.0
    # scenario
    r_b_m: float = 10.0
    r_e_m: float = 5.0
    theta_rad: float = math.pi / 6
    field_model: str = "exact"
    # budget
    p_tx_dbm: float = 10.0
    noise_dbm: float = -80.0
    # optimizer
    n_rf: int = 2
    epsilon: float = 10.0
    delta: float = 0.003
    max_iterations: int = 500
    seed: int = 0
    on_infeasible: str = "raise"
    # studies
    n_trials: int = 1000
    restarts: int = 100
    epsilon_grid: list[float] = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0])
    sweep_parameter: str = "r_e"
    sweep_grid: list[float] | None = None
    error_kind: str = "angle"
    error_grid: list[float] = field(default_factory=lambda: [-0.05, -0.03, -0.01, 0.0, 0.01, 0.03, 0.05])
    robustness_r_e_grid: list[float] | None = None
    compare_parameter: str = "r_b"
    compare_grid: list[float] | None = None
    # fda
    fda_delta_f_hz: float = 1e6
    fda_n_x: int = 16
    symbol_time_s: float = 1e-6
    fda_t_grid: list[float] = field(default_factory=lambda: [0.0, 2.5e-7, 5e-7, 7.5e-7])
    fda_r_grid: list[float] = field(default_factory=lambda: [float(r) for r in range(10, 601, 10)])
    fda_draws: int = 100
    # output
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        for key in ("n_x", "n_y", "n_rf", "max_iterations", "n_trials", "restarts", "workers", "fda_n_x", "fda_draws"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                bad(key, f"must be a positive integer, got {v!r}")
        if (self.spacing_lambda is None) == (self.spacing_m is None):
            bad("spacing_lambda", "exactly one of spacing_lambda and spacing_m must be set")
        for key in ("carrier_hz", "r_b_m", "r_e_m", "epsilon", "delta", "symbol_time_s", "fraunhofer_factor"):
            v = getattr(self, key)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                bad(key, f"must be a positive number, got {v!r}")
        spacing = self.spacing_lambda if self.spacing_m is None else self.spacing_m
        if not isinstance(spacing, (int, float)) or not spacing > 0:
            bad("spacing", f"must be a positive number, got {spacing!r}")
        if not -math.pi / 2 < self.theta_rad < math.pi / 2:
            bad("theta_rad", f"must lie in (-pi/2, pi/2), got {self.theta_rad}")
        if self.field_model not in ("exact", "far"):
            bad("field_model", f"must be 'exact' or 'far', got {self.field_model!r}")
        if self.format not in ("csv", "json"):
            bad("format", f"must be 'csv' or 'json', got {self.format!r}")
        if self.on_infeasible not in ("raise", "clip", "rescale"):
            bad("on_infeasible", f"must be raise, clip or rescale, got {self.on_infeasible!r}")
        if self.sweep_parameter not in SWEEP_PARAMETERS:
            bad("sweep_parameter", f"must be one of {', '.join(SWEEP_PARAMETERS)}")
        if self.compare_parameter not in ("r_b", "r_e"):
            bad("compare_parameter", "must be 'r_b' or 'r_e'")
        if self.error_kind not in ("angle", "range"):
            bad("error_kind", "must be 'angle' (degrees) or 'range' (meters)")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            bad("seed", f"must be an unsigned 64-bit integer, got {self.seed!r}")
        if abs(self.fda_delta_f_hz) * max(self.n_x, self.fda_n_x) > 1e-3 * self.carrier_hz:
            bad("fda_delta_f_hz", "largest offset must stay below 1e-3 of the carrier")
        return self

    # derived objects
    def geometry(self, n_x: int | None = None, n_y: int | None = None, spacing_lambda: float | None = None) -> UpaGeometry:
        n_x = self.n_x if n_x is None else n_x
        n_y = self.n_y if n_y is None else n_y
        if spacing_lambda is not None:
            return UpaGeometry.from_wavelengths(n_x, n_y, spacing_lambda, self.carrier_hz)
        if self.spacing_m is not None:
            return UpaGeometry(n_x, n_y, self.spacing_m, self.carrier_hz)
        return UpaGeometry.from_wavelengths(n_x, n_y, self.spacing_lambda, self.carrier_hz)

    def budget(self, p_tx_dbm: float | None = None) -> LinkBudget:
        return LinkBudget.from_dbm(self.p_tx_dbm if p_tx_dbm is None else p_tx_dbm, self.noise_dbm)

    def bob(self) -> ReceiverLocation:
        return ReceiverLocation(self.r_b_m, self.theta_rad)

    def eve(self) -> ReceiverLocation:
        return ReceiverLocation(self.r_e_m, self.theta_rad)

    def mode(self) -> FieldModel:
        return FieldModel(self.field_model)

    def ncoa_config(self, epsilon: float | None = None) -> NcoaConfig:
        return NcoaConfig(self.epsilon if epsilon is None else epsilon, self.delta, self.max_iterations, self.seed)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


FIELD_NAMES = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value: Any) -> Any:
    """Bring YAML/CLI scalars to the types the dataclass declares."""
    default = getattr(ExperimentConfig(), key)
    float_keys = {
        "spacing_lambda", "spacing_m", "carrier_hz", "fraunhofer_factor", "r_b_m", "r_e_m", "theta_rad",
        "p_tx_dbm", "noise_dbm", "epsilon", "delta", "fda_delta_f_hz", "symbol_time_s",
    }
    if value is None:
        return None
    if key in float_keys:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
        return value
    if key.endswith("_grid"):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}") from None
    return value


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse a flat ``key: value`` YAML document, reporting problems with line numbers."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if node is None:
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{source}:{node.start_mark.line + 1}: expected a flat key/value mapping")
    raw = yaml.safe_load(text)
    values: dict[str, Any] = {}
    for key_node, _ in node.value:
        key = key_node.value
        where = f"{source}:{key_node.start_mark.line + 1}"
        if key not in FIELD_NAMES:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw[key])
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return values


def resolve_config(file_values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in merged:
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown key {key!r}")
    if "spacing_m" in merged and merged["spacing_m"] is not None:
        if merged.get("spacing_lambda") is not None:
            raise ConfigError("spacing_lambda: exactly one of spacing_lambda and spacing_m must be set")
        merged["spacing_lambda"] = None
    merged = {k: _coerce(k, v) for k, v in merged.items()}
    return ExperimentConfig(**merged).validate()


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# ---------------------------------------------------------------------------
# execution helpers


def parallel_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


SWEEP_COLUMNS = [
    "parameter", "value", "method", "secrecy_rate_bps_hz", "lambda_a", "lambda_b", "iterations", "converged", "seed",
]


def _result_row(parameter: str, value: Any, method: str, res: NcoaResult, seed: int) -> dict[str, Any]:
    return {
        "parameter": parameter,
        "value": value,
        "method": method,
        "secrecy_rate_bps_hz": res.secrecy_rate_bps_hz,
        "lambda_a": res.lambda_a,
        "lambda_b": res.lambda_b,
        "iterations": res.iterations,
        "converged": res.converged,
        "seed": seed,
    }


def _method_name(n_rf: int) -> str:
    return "ncoa-hybrid" if n_rf >= 2 else "ncoa-fa"


# ---------------------------------------------------------------------------
# ncoa


def run_ncoa(cfg: ExperimentConfig):
    res = ncoa(
        cfg.geometry(), cfg.bob(), cfg.eve(), cfg.budget(), cfg.n_rf, cfg.ncoa_config(),
        mode=cfg.mode(), on_infeasible=cfg.on_infeasible,
    )
    row = _result_row("none", "", _method_name(cfg.n_rf), res, cfg.seed)
    summary = {
        "secrecy_rate_bps_hz": res.secrecy_rate_bps_hz,
        "lambda_sigma": res.lambda_sigma,
        "lambda_a": res.lambda_a,
        "lambda_b": res.lambda_b,
        "iterations": res.iterations,
        "converged": res.converged,
        "mode": res.mode.value,
        "reconstruction_error": res.reconstruction_error,
        "tx_power_w": res.tx_power_w,
    }
    return SWEEP_COLUMNS, [row], summary


# ---------------------------------------------------------------------------
# Monte Carlo over random analog initializations

MONTECARLO_COLUMNS = ["trial", "seed", "iteration", "lambda_sigma", "secrecy_rate_bps_hz"]


def _fa_trial(args):
    cfg, epsilon, trial = args
    ops = build_wiretap_operators(cfg.geometry(), cfg.bob(), cfg.eve(), cfg.budget(), cfg.mode())
    return fa_descend(ops, cfg.ncoa_config(epsilon), reduced_eigensolve(ops), stream=trial, record_trace=True)


def fa_restarts(cfg: ExperimentConfig, n: int, epsilon: float | None = None) -> list[NcoaResult]:
    eps = cfg.epsilon if epsilon is None else epsilon
    return parallel_map(_fa_trial, [(cfg, eps, t) for t in range(n)], cfg.workers)


def run_montecarlo(cfg: ExperimentConfig):
    results = fa_restarts(cfg, cfg.n_trials)
    rows = []
    for trial, res in enumerate(results):
        for it, lam in enumerate(res.trace):
            rate = math.log2(1 + lam) if lam > 0 else 0.0
            rows.append({"trial": trial, "seed": cfg.seed, "iteration": it, "lambda_sigma": lam, "secrecy_rate_bps_hz": rate})
    iters = np.array([r.iterations for r in results])
    finals = np.array([r.secrecy_rate_bps_hz for r in results])
    best = float(finals.max())
    at_20 = np.array([_rate(r.trace[min(20, len(r.trace) - 1)]) for r in results])
    counts = np.bincount(iters)
    summary = {
        "trials": len(results),
        "mean_iterations": float(iters.mean()),
        "std_iterations": float(iters.std()),
        "converged_fraction": float(np.mean([r.converged for r in results])),
        "mean_secrecy_rate_bps_hz": float(finals.mean()),
        "best_secrecy_rate_bps_hz": best,
        "fraction_within_5pct_of_best": float(np.mean(finals >= 0.95 * best)),
        "fraction_within_2pct_of_final_by_iteration_20": float(np.mean(at_20 >= 0.98 * finals.mean())),
        "iteration_histogram": {str(k): int(v) for k, v in enumerate(counts) if v},
    }
    return MONTECARLO_COLUMNS, rows, summary


def _rate(lam: float) -> float:
    return math.log2(1 + lam) if lam > 0 else 0.0


# ---------------------------------------------------------------------------
# step parameter study

STEP_COLUMNS = [
    "epsilon", "restarts", "mean_secrecy_rate_bps_hz", "std_secrecy_rate_bps_hz", "mean_iterations",
    "converged_fraction", "seed",
]


def step_study_rows(cfg: ExperimentConfig, epsilons: Iterable[float], restarts: int) -> list[dict[str, Any]]:
    rows = []
    for eps in epsilons:
        results = fa_restarts(cfg, restarts, eps)
        rates = np.array([r.secrecy_rate_bps_hz for r in results])
        rows.append({
            "epsilon": float(eps),
            "restarts": restarts,
            "mean_secrecy_rate_bps_hz": float(rates.mean()),
            "std_secrecy_rate_bps_hz": float(rates.std()),
            "mean_iterations": float(np.mean([r.iterations for r in results])),
            "converged_fraction": float(np.mean([r.converged for r in results])),
            "seed": cfg.seed,
        })
    return rows


def run_step_study(cfg: ExperimentConfig):
    rows = step_study_rows(cfg, cfg.epsilon_grid, cfg.restarts)
    best = max(r["mean_secrecy_rate_bps_hz"] for r in rows)
    return STEP_COLUMNS, rows, {"best_mean_secrecy_rate_bps_hz": best}


# ---------------------------------------------------------------------------
# parameter sweeps


def _sweep_point(args):
    cfg, parameter, value = args
    geom, budget = cfg.geometry(), cfg.budget()
    bob, eve = cfg.bob(), cfg.eve()
    if parameter == "p_tx":
        budget = cfg.budget(value)
    elif parameter == "spacing":
        geom = cfg.geometry(spacing_lambda=value)
    elif parameter == "r_e":
        eve = ReceiverLocation(value, cfg.theta_rad)
    elif parameter == "r_b":
        bob = ReceiverLocation(value, cfg.theta_rad)
    elif parameter == "n_t":
        side = math.isqrt(int(value))
        if side * side != int(value):
            raise ConfigError(f"sweep_grid: n_t values must be perfect squares, got {value}")
        geom = cfg.geometry(side, side)
    res = ncoa(geom, bob, eve, budget, cfg.n_rf, cfg.ncoa_config(), mode=cfg.mode(), on_infeasible=cfg.on_infeasible)
    return _result_row(parameter, value, _method_name(cfg.n_rf), res, cfg.seed)


def run_sweep(cfg: ExperimentConfig):
    grid = cfg.sweep_grid or DEFAULT_SWEEP_GRIDS[cfg.sweep_parameter]
    rows = parallel_map(_sweep_point, [(cfg, cfg.sweep_parameter, v) for v in grid], cfg.workers)
    return SWEEP_COLUMNS, rows, {"points": len(rows)}


# ---------------------------------------------------------------------------
# robustness to Eve location error

ROBUSTNESS_COLUMNS = [
    "error_kind", "error", "r_e_m", "secrecy_rate_bps_hz", "nominal_rate_bps_hz", "degradation", "seed",
]


def designed_rate(cfg: ExperimentConfig, r_e_true: float, error: float, kind: str) -> float:
    """Rate at Eve's true location for a beamformer designed at her estimated location."""
    geom, budget, bob = cfg.geometry(), cfg.budget(), cfg.bob()
    if kind == "angle":
        est = ReceiverLocation(r_e_true, cfg.theta_rad + math.radians(error))
    else:
        est = ReceiverLocation(r_e_true + error, cfg.theta_rad)
    res = ncoa(geom, bob, est, budget, cfg.n_rf, cfg.ncoa_config(), mode=cfg.mode(), on_infeasible=cfg.on_infeasible)
    true_eve = ReceiverLocation(r_e_true, cfg.theta_rad)
    w = res.weights
    w = w / np.linalg.norm(w)
    return secrecy_rate(
        w,
        channel_vector(geom, bob, cfg.mode()),
        channel_vector(geom, true_eve, cfg.mode()),
        path_gain(geom.carrier_hz, bob.range_m),
        path_gain(geom.carrier_hz, r_e_true),
        budget,
    ).rate_bps_hz


def _robustness_point(args):
    cfg, r_e, error = args
    if cfg.error_kind == "range" and r_e + error <= 0:
        return None
    nominal = designed_rate(cfg, r_e, 0.0, cfg.error_kind)
    rate = designed_rate(cfg, r_e, error, cfg.error_kind)
    return {
        "error_kind": cfg.error_kind,
        "error": error,
        "r_e_m": r_e,
        "secrecy_rate_bps_hz": rate,
        "nominal_rate_bps_hz": nominal,
        "degradation": 1.0 - rate / nominal if nominal > 0 else 0.0,
        "seed": cfg.seed,
    }


def run_robustness(cfg: ExperimentConfig):
    r_es = cfg.robustness_r_e_grid or [cfg.r_e_m]
    tasks = [(cfg, r_e, err) for r_e in r_es for err in cfg.error_grid]
    rows = [r for r in parallel_map(_robustness_point, tasks, cfg.workers) if r is not None]
    return ROBUSTNESS_COLUMNS, rows, {"points": len(rows)}


# ---------------------------------------------------------------------------
# method comparison

COMPARE_METHODS = ("ncoa-hybrid", "ncoa-fa", "farfield-baseline", "capacity-bound")


def _compare_point(args):
    cfg, parameter, value = args
    geom, budget, mode = cfg.geometry(), cfg.budget(), cfg.mode()
    bob, eve = cfg.bob(), cfg.eve()
    if parameter == "r_b":
        bob = ReceiverLocation(value, cfg.theta_rad)
    else:
        eve = ReceiverLocation(value, cfg.theta_rad)
    a_b = path_gain(geom.carrier_hz, bob.range_m)
    a_e = path_gain(geom.carrier_hz, eve.range_m)
    hyb = ncoa(geom, bob, eve, budget, max(2, cfg.n_rf), cfg.ncoa_config(), mode=mode, on_infeasible=cfg.on_infeasible)
    fa = ncoa(geom, bob, eve, budget, 1, cfg.ncoa_config(), mode=mode)
    base = traditional_baseline(geom, bob, eve, budget, mode)
    bound = farfield_secrecy_capacity_bound(geom.n_t, a_b, a_e, budget)
    rows = [_result_row(parameter, value, "ncoa-hybrid", hyb, cfg.seed), _result_row(parameter, value, "ncoa-fa", fa, cfg.seed)]
    for method, rate in (("farfield-baseline", base.rate_bps_hz), ("capacity-bound", bound)):
        rows.append({
            "parameter": parameter, "value": value, "method": method, "secrecy_rate_bps_hz": rate,
            "lambda_a": hyb.lambda_a, "lambda_b": hyb.lambda_b, "iterations": 0, "converged": True, "seed": cfg.seed,
        })
    return rows


def run_compare(cfg: ExperimentConfig):
    grid = cfg.compare_grid or DEFAULT_SWEEP_GRIDS[cfg.compare_parameter]
    chunks = parallel_map(_compare_point, [(cfg, cfg.compare_parameter, v) for v in grid], cfg.workers)
    return SWEEP_COLUMNS, [row for chunk in chunks for row in chunk], {"points": len(grid), "methods": list(COMPARE_METHODS)}


# ---------------------------------------------------------------------------
# frequency diverse array

FDA_COLUMNS = ["model", "t_s", "range_m", "theta_rad", "af_abs"]


def fda_config(cfg: ExperimentConfig, offsets: np.ndarray | None = None) -> FdaConfig:
    # one row of elements along x, where the plane-wave phase varies
    geom = UpaGeometry(1, cfg.fda_n_x, SPEED_OF_LIGHT / cfg.carrier_hz / 2, cfg.carrier_hz)
    if offsets is None:
        offsets = linear_chirp_offsets(geom.n_t, cfg.fda_delta_f_hz)
    return FdaConfig(geom, offsets, cfg.symbol_time_s)


def fda_checks(cfg: ExperimentConfig) -> dict[str, float]:
    """Randomized checks of the per-symbol FDA model.

    ``bob_eve_residual``: largest relative mismatch between Bob's and Eve's
    per-symbol array factors at a shared angle. ``bound_ratio``: largest
    ``|AF|^2 / (n_t sum |w|^2)``. ``equivalence_residual``: largest relative
    mismatch between an offset array and the same array with phase-rotated
    weights. ``optimum_excess``: largest gain of the offset optimum over the
    zero-offset optimum, in bps/Hz.
    """
    rng = phase_rng(cfg.seed, 2**32)
    base = fda_config(cfg)
    n_t = base.base_geometry.n_t
    budget = cfg.budget()
    worst = {"bob_eve_residual": 0.0, "bound_ratio": 0.0, "equivalence_residual": 0.0, "optimum_excess": -math.inf}
    for _ in range(cfg.fda_draws):
        offsets = rng.uniform(-1.0, 1.0, n_t) * 1e-4 * cfg.carrier_hz
        fcfg = FdaConfig(base.base_geometry, offsets, cfg.symbol_time_s)
        w = rng.normal(size=n_t) + 1j * rng.normal(size=n_t)
        pre = PrecoderSnapshot.normalized(w)
        n0 = int(rng.integers(0, 10_000))
        theta = float(rng.uniform(-1.2, 1.2))
        r_b, r_e = (float(x) for x in rng.uniform(0.5, 50.0, 2))
        loc_b, loc_e = ReceiverLocation(r_b, theta), ReceiverLocation(r_e, theta)
        a_b = synchronized_received_amplitude(fcfg, pre, n0, loc_b) / path_gain(cfg.carrier_hz, r_b)
        a_e = synchronized_received_amplitude(fcfg, pre, n0, loc_e) / path_gain(cfg.carrier_hz, r_e)
        worst["bob_eve_residual"] = max(worst["bob_eve_residual"], abs(a_b - a_e) / max(abs(a_b), 1e-300))
        af = synchronized_array_factor(fcfg, pre, n0, loc_b)
        worst["bound_ratio"] = max(worst["bound_ratio"], abs(af) ** 2 / array_gain_bound(pre))
        mapped = PrecoderSnapshot(fda_phase_equivalence(fcfg)(pre.weights, n0))
        a_zero = synchronized_received_amplitude(fcfg.without_offsets(), mapped, n0, loc_b) / path_gain(cfg.carrier_hz, r_b)
        worst["equivalence_residual"] = max(worst["equivalence_residual"], abs(a_b - a_zero) / max(abs(a_b), 1e-300))
        excess = fda_optimal_secrecy_rate(fcfg, n0, theta, r_b, r_e, budget) - fda_optimal_secrecy_rate(
            fcfg.without_offsets(), n0, theta, r_b, r_e, budget
        )
        worst["optimum_excess"] = max(worst["optimum_excess"], excess)
    return worst


def run_fda(cfg: ExperimentConfig):
    fcfg = fda_config(cfg)
    t = np.array(cfg.fda_t_grid)
    r = np.array(cfg.fda_r_grid)
    tt, rr = np.meshgrid(t, r, indexing="ij")
    af = np.abs(traditional_af(fcfg, tt, cfg.theta_rad, rr))
    rows = [
        {"model": "traditional-flawed", "t_s": float(ti), "range_m": float(ri), "theta_rad": cfg.theta_rad, "af_abs": float(a)}
        for ti, ri, a in zip(tt.ravel(), rr.ravel(), af.ravel())
    ]
    # Slices along t - r/c = const must be flat.
    t0 = float(t[0])
    cone = np.abs(traditional_af(fcfg, t0 + r / SPEED_OF_LIGHT, cfg.theta_rad, r))
    summary = fda_checks(cfg)
    summary["light_cone_spread"] = float(cone.max() - cone.min())
    summary["snapshot_range_spread"] = float((af.max(axis=1) - af.min(axis=1)).max())
    return FDA_COLUMNS, rows, summary


COMMANDS: dict[str, Callable] = {
    "ncoa": run_ncoa,
    "montecarlo": run_montecarlo,
    "step-study": run_step_study,
    "sweep": run_sweep,
    "robustness": run_robustness,
    "compare": run_compare,
    "fda-af": run_fda,
}


def provenance(command: str, cfg: ExperimentConfig, summary: dict[str, Any]) -> dict[str, Any]:
    return {"command": command, "version": __version__, "config": cfg.to_dict(), "summary": summary}
