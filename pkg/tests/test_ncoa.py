import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangesec.channel import FieldModel, LinkBudget, channel_vector, path_gain
from rangesec.geometry import ReceiverLocation, UpaGeometry
from rangesec.ncoa import (
    InfeasibleError,
    NcoaConfig,
    NcoaMode,
    WiretapOperators,
    apply_b_inv_sqrt,
    build_wiretap_operators,
    eigen_decomposed_quotient,
    fa_descend,
    fa_gradient,
    fa_objective,
    hybrid_decompose,
    hybrid_solve,
    ncoa,
    nonconstrained_optimum,
    phase_rng,
    rayleigh_quotient,
    reduced_eigensolve,
)
from rangesec.secrecy import secrecy_rate

from conftest import dense_matrices, dense_power, dense_whitened, random_operators, random_scenario


@pytest.mark.parametrize("n_t", [4, 16, 64])
def test_b_inv_sqrt_matches_dense(rng, n_t):
    for _ in range(5):
        ops = random_operators(rng, n_t)
        _, b = dense_matrices(ops)
        x = rng.normal(size=n_t) + 1j * rng.normal(size=n_t)
        ref = dense_power(b, -0.5) @ x
        # B's condition number reaches ~1e6 here, which limits the dense oracle
        assert np.linalg.norm(apply_b_inv_sqrt(ops, x) - ref) <= 1e-9 * np.linalg.norm(ref)
        assert np.allclose(ops.apply_b_sqrt(ops.apply_b_inv_sqrt(x)), x, rtol=1e-10)
        assert np.allclose(ops.apply_b(x), b @ x)


@pytest.mark.parametrize("n_t", [4, 16, 64])
def test_reduced_eigensolve_matches_dense(rng, n_t):
    for _ in range(5):
        ops = random_operators(rng, n_t)
        vals, vecs = np.linalg.eigh(dense_whitened(ops))
        pair = reduced_eigensolve(ops)
        assert pair.lambda_a == pytest.approx(vals[-1], rel=1e-9)
        assert pair.lambda_b == pytest.approx(vals[0], rel=1e-9)
        assert abs(np.vdot(vecs[:, -1], pair.v_a)) == pytest.approx(1.0, abs=1e-8)
        assert abs(np.vdot(pair.v_a, pair.v_b)) < 1e-10
        assert pair.lambda_a >= 0 >= pair.lambda_b


def test_quotient_forms_agree(rng):
    for n_t in (4, 16, 64):
        ops = random_operators(rng, n_t)
        pair = reduced_eigensolve(ops)
        a, b = dense_matrices(ops)
        for _ in range(5):
            w = rng.normal(size=n_t) + 1j * rng.normal(size=n_t)
            dense = (np.vdot(w, a @ w) / np.vdot(w, b @ w)).real
            assert rayleigh_quotient(ops, w) == pytest.approx(dense, rel=1e-10, abs=1e-12)
            assert eigen_decomposed_quotient(ops, pair, w) == pytest.approx(dense, rel=1e-8, abs=1e-10)


def test_quotient_scale_invariant_and_zero_rejected(rng):
    ops = random_operators(rng, 16)
    w = rng.normal(size=16) + 1j * rng.normal(size=16)
    assert rayleigh_quotient(ops, 3.7j * w) == pytest.approx(rayleigh_quotient(ops, w), rel=1e-12)
    with pytest.raises(ValueError):
        rayleigh_quotient(ops, np.zeros(16))


def test_optimum_attains_lambda_a(rng):
    for n_t in (4, 16, 64):
        ops = random_operators(rng, n_t)
        pair = reduced_eigensolve(ops)
        w = nonconstrained_optimum(ops, pair)
        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert rayleigh_quotient(ops, w) == pytest.approx(pair.lambda_a, rel=1e-10)
        for _ in range(10):
            x = rng.normal(size=n_t) + 1j * rng.normal(size=n_t)
            assert rayleigh_quotient(ops, x) <= pair.lambda_a * (1 + 1e-12)


def test_permutation_invariance(rng):
    ops = random_operators(rng, 16)
    perm = rng.permutation(16)
    shuffled = WiretapOperators(ops.h_b[perm], ops.h_e[perm], ops.a_b, ops.a_e, ops.noise_over_power)
    p0, p1 = reduced_eigensolve(ops), reduced_eigensolve(shuffled)
    assert p1.lambda_a == pytest.approx(p0.lambda_a, rel=1e-12)
    assert p1.lambda_b == pytest.approx(p0.lambda_b, rel=1e-12)


def test_degenerate_parallel_channels():
    h = np.exp(1j * np.linspace(0, 3, 16))
    ops = WiretapOperators(h, h.copy(), 1e-5, 2e-5, 1e-9)
    pair = reduced_eigensolve(ops)
    assert pair.degenerate
    assert pair.lambda_a == 0.0 and pair.lambda_b < 0
    dense = np.linalg.eigvalsh(dense_whitened(ops))
    assert pair.lambda_b == pytest.approx(dense[0], rel=1e-9)
    res = hybrid_solve(ops)
    assert res.secrecy_rate_bps_hz == 0.0
    # Bob nearer: the single nonzero eigenvalue is positive.
    ops = WiretapOperators(h, h.copy(), 2e-5, 1e-5, 1e-9)
    pair = reduced_eigensolve(ops)
    assert pair.lambda_a > 0 and pair.lambda_b == 0.0
    assert pair.lambda_a == pytest.approx(np.linalg.eigvalsh(dense_whitened(ops))[-1], rel=1e-9)


def test_single_antenna_degenerate():
    ops = WiretapOperators(np.ones(1, complex), np.ones(1, complex), 2e-5, 1e-5, 1e-9)
    pair = reduced_eigensolve(ops)
    assert pair.lambda_a == pair.lambda_b == pytest.approx(np.linalg.eigvalsh(dense_whitened(ops))[0], rel=1e-12)


def test_hybrid_uniform_magnitude():
    n = 64
    w = np.exp(1j * np.linspace(0, 5, n)) / math.sqrt(n)
    bf, err = hybrid_decompose(w)
    assert err < 1e-12
    delta = np.mod(bf.analog_phases[:, 0] - bf.analog_phases[:, 1], 2 * math.pi) / 2
    assert np.allclose(delta, math.pi / 4)
    assert np.allclose(bf.digital, [1 / math.sqrt(2)] * 2)


def test_hybrid_boundary_magnitude():
    n = 16
    w = np.zeros(n, complex)
    w[:8] = math.sqrt(2 / n) * np.exp(1j * np.arange(8))
    bf, err = hybrid_decompose(w, n_rf=4)
    assert err < 1e-12
    assert np.allclose(bf.analog_phases[:8, 0], bf.analog_phases[:8, 1])
    assert np.all(bf.digital[2:] == 0)


def test_hybrid_infeasible_reports_indices():
    w = np.full(16, 0.1, complex)
    w[[2, 7]] = 0.5
    w /= np.linalg.norm(w)
    with pytest.raises(InfeasibleError) as exc:
        hybrid_decompose(w)
    assert list(exc.value.indices) == [3, 8]
    assert exc.value.cap == pytest.approx(math.sqrt(2 / 16))


def test_hybrid_clip_and_rescale():
    w = np.full(16, 0.1, complex)
    w[[2, 7]] = 0.5
    w /= np.linalg.norm(w)
    bf, err = hybrid_decompose(w, on_infeasible="clip")
    assert np.linalg.norm(bf.weights) == pytest.approx(1.0)
    assert err > 0.01
    bf, err = hybrid_decompose(w, on_infeasible="rescale")
    assert err < 1e-12
    with pytest.raises(ValueError):
        hybrid_decompose(w, on_infeasible="ignore")
    with pytest.raises(ValueError):
        hybrid_decompose(w, n_rf=1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 16, 64]))
def test_hybrid_reconstruction_property(seed, n):
    rng = np.random.default_rng(seed)
    mags = rng.uniform(0, math.sqrt(2 / n), n)
    w = mags * np.exp(1j * rng.uniform(-math.pi, math.pi, n))
    bf, err = hybrid_decompose(w)
    assert err <= 1e-12
    assert np.allclose(np.abs(bf.analog), 1 / math.sqrt(n))


def test_default_scenario_hybrid(default_scenario):
    res = ncoa(*default_scenario, n_rf=2)
    assert res.mode is NcoaMode.HYBRID_CLOSED_FORM
    assert res.reconstruction_error <= 1e-9
    assert res.secrecy_rate_bps_hz == pytest.approx(math.log2(1 + res.lambda_a), abs=1e-9)
    assert res.tx_power_w == pytest.approx(0.01)
    assert res.lambda_a >= res.lambda_b
    geom, bob, eve, budget = default_scenario
    rep = secrecy_rate(
        res.weights, channel_vector(geom, bob), channel_vector(geom, eve),
        path_gain(geom.carrier_hz, 10.0), path_gain(geom.carrier_hz, 5.0), budget,
    )
    assert rep.rate_bps_hz == pytest.approx(res.secrecy_rate_bps_hz, rel=1e-10)


def test_extra_rf_chains_do_not_help(default_scenario):
    r2 = ncoa(*default_scenario, n_rf=2)
    r8 = ncoa(*default_scenario, n_rf=8)
    assert r8.secrecy_rate_bps_hz == pytest.approx(r2.secrecy_rate_bps_hz, rel=1e-12)


def test_fully_analog_below_hybrid(default_scenario):
    fa = ncoa(*default_scenario, n_rf=1)
    assert fa.mode is NcoaMode.FULLY_ANALOG_GD
    assert 0 < fa.secrecy_rate_bps_hz <= ncoa(*default_scenario, n_rf=2).secrecy_rate_bps_hz
    assert np.allclose(np.abs(fa.weights), 1 / math.sqrt(1024))


def test_farfield_mode_gives_zero(default_scenario):
    for n_rf in (1, 2):
        assert ncoa(*default_scenario, n_rf=n_rf, mode=FieldModel.FAR_FIELD).secrecy_rate_bps_hz == 0.0


def test_equal_ranges_give_zero(default_scenario):
    geom, bob, _, budget = default_scenario
    assert ncoa(geom, bob, bob, budget, n_rf=2).secrecy_rate_bps_hz == 0.0


def test_gradient_matches_finite_differences(rng):
    ops = random_operators(rng, 32)
    pair = reduced_eigensolve(ops)
    phases = rng.uniform(0, 2 * math.pi, 32)
    g = fa_gradient(ops, phases, pair)
    h = 1e-6
    fd = np.empty(32)
    for i in range(32):
        e = np.zeros(32)
        e[i] = h
        fd[i] = (fa_objective(ops, phases + e, pair) - fa_objective(ops, phases - e, pair)) / (2 * h)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-7 * np.abs(g).max())


def test_fa_descend_deterministic_and_stream_dependent(default_scenario):
    ops = build_wiretap_operators(*default_scenario)
    cfg = NcoaConfig()
    a = fa_descend(ops, cfg, stream=3, record_trace=True)
    b = fa_descend(ops, cfg, stream=3, record_trace=True)
    c = fa_descend(ops, cfg, stream=4)
    assert np.array_equal(a.beamformer.analog_phases, b.beamformer.analog_phases)
    assert a.trace == b.trace
    assert len(a.trace) == a.iterations + 1
    assert a.trace[-1] == pytest.approx(a.lambda_sigma, rel=1e-12)
    assert not np.array_equal(a.beamformer.analog_phases, c.beamformer.analog_phases)


def test_fa_descend_respects_max_iterations(default_scenario):
    ops = build_wiretap_operators(*default_scenario)
    res = fa_descend(ops, NcoaConfig(step_rad=100.0, max_iterations=3))
    assert res.iterations == 3 and not res.converged


def test_fa_descend_initial_phases(rng):
    ops = random_operators(rng, 16)
    start = rng.uniform(0, 2 * math.pi, 16)
    res = fa_descend(ops, NcoaConfig(step_rad=1e-3, max_iterations=1), initial_phases=start)
    assert np.allclose(np.exp(1j * res.beamformer.analog_phases[:, 0]), np.exp(1j * start), atol=1e-2)


def test_phase_rng_streams_independent():
    a = phase_rng(7, 0).uniform(size=4)
    assert np.array_equal(a, phase_rng(7, 0).uniform(size=4))
    assert not np.array_equal(a, phase_rng(7, 1).uniform(size=4))
    assert not np.array_equal(a, phase_rng(8, 0).uniform(size=4))


@pytest.mark.parametrize("kw", [dict(step_rad=0.0), dict(convergence_threshold=-1.0), dict(max_iterations=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        NcoaConfig(**kw)


def test_zero_power_rejected(default_scenario):
    geom, bob, eve, _ = default_scenario
    with pytest.raises(ValueError):
        build_wiretap_operators(geom, bob, eve, LinkBudget(0.0, 1e-11))
    with pytest.raises(ValueError):
        ncoa(*default_scenario, n_rf=0)
