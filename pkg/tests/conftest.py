import math

import mpmath
import numpy as np
import pytest

from rangesec.channel import LinkBudget
from rangesec.geometry import ReceiverLocation, UpaGeometry
from rangesec.ncoa import WiretapOperators, build_wiretap_operators

ARRAY_SHAPES = {4: (2, 2), 16: (4, 4), 32: (4, 8), 64: (8, 8)}


def random_scenario(rng: np.random.Generator, n_t: int):
    """Small near-field scenario with Bob and Eve at a shared angle and distinct ranges."""
    n_x, n_y = ARRAY_SHAPES[n_t]
    geom = UpaGeometry.from_wavelengths(n_x, n_y, rng.uniform(0.5, 5.0), 300e9)
    theta = rng.uniform(-1.0, 1.0)
    r_b, r_e = rng.uniform(0.02, 0.5, 2)
    budget = LinkBudget.from_dbm(rng.uniform(-10.0, 20.0), -80.0)
    return geom, ReceiverLocation(r_b, theta), ReceiverLocation(r_e, theta), budget


def random_operators(rng: np.random.Generator, n_t: int) -> WiretapOperators:
    return build_wiretap_operators(*random_scenario(rng, n_t))


def dense_matrices(ops: WiretapOperators):
    h_b, h_e = ops.h_b[:, None], ops.h_e[:, None]
    a = ops.a_b**2 * h_b @ h_b.conj().T - ops.a_e**2 * h_e @ h_e.conj().T
    b = ops.noise_over_power * np.eye(ops.n_t) + ops.a_e**2 * h_e @ h_e.conj().T
    return a, b


def dense_power(m: np.ndarray, p: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    return (vecs * vals**p) @ vecs.conj().T


def dense_whitened(ops: WiretapOperators) -> np.ndarray:
    a, b = dense_matrices(ops)
    bi = dense_power(b, -0.5)
    c = bi @ a @ bi
    return (c + c.conj().T) / 2


def mp_dense_spectrum(ops: WiretapOperators, dps: int = 30) -> list[float]:
    """Eigenvalues of ``B^{-1/2} A B^{-1/2}`` from a dense extended-precision solve.

    Whitens with the Cholesky factor ``B = L L^H``; ``L^{-1} A L^{-H}`` is
    similar to ``B^{-1} A`` and so shares the spectrum. Float64 dense solves
    lose ~cond(B) * eps here, which exceeds 1e-9 for strongly lit Eves.
    """
    with mpmath.workdps(dps):
        col = lambda v: mpmath.matrix([[mpmath.mpc(complex(x))] for x in v])
        h_b, h_e = col(ops.h_b), col(ops.h_e)
        a_b2, a_e2 = mpmath.mpf(ops.a_b) ** 2, mpmath.mpf(ops.a_e) ** 2
        b = mpmath.mpf(ops.noise_over_power) * mpmath.eye(ops.n_t) + a_e2 * h_e * h_e.H
        l_inv = mpmath.inverse(mpmath.cholesky(b))
        x, y = l_inv * h_b, l_inv * h_e
        k = a_b2 * x * x.H - a_e2 * y * y.H
        vals = mpmath.eigh(k, eigvals_only=True)
        return sorted(float(v) for v in vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def default_scenario():
    geom = UpaGeometry.from_wavelengths(32, 32, 5.0, 300e9)
    return geom, ReceiverLocation(10.0, math.pi / 6), ReceiverLocation(5.0, math.pi / 6), LinkBudget.from_dbm(10.0, -80.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
