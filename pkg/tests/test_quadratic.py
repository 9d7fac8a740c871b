import math

import numpy as np
import pytest
from scipy.linalg import expm

from focklab import (
    FockParams,
    Symbol,
    bogoliubov_residual,
    build_quadratic_generator,
    evolve_classical,
    propagate_u2,
    symplectic_beta,
    vacuum,
)
from focklab.quadratic import free_phase_apply, propagate_u2_adjoint
from focklab.wick import two_tensor_matrix


@pytest.fixture
def quartic_gen(space1, quartic):
    # cutoff sized so squeezed low-sector states keep top-two-sector mass
    # under 1e-10; the residual floor is then Krylov accumulation
    traj = evolve_classical(space1, quartic, np.array([1.0 + 0j]), 1.0,
                            nsteps=1000, richardson=False)
    return build_quadratic_generator(space1, traj, 50)


def _free_gen(space, n_max=16, T=1.0, nsteps=200):
    traj = evolve_classical(space, Symbol(space.d, {}), np.array([0.4 + 0j] * space.d),
                            T, nsteps=nsteps, richardson=False)
    return build_quadratic_generator(space, traj, n_max)


def test_u2_free_is_free_rotation(space1, rng):
    gen = _free_gen(space1)
    params1 = FockParams(1, 16, 1.0)
    psi = rng.normal(size=params1.dim) + 1j * rng.normal(size=params1.dim)
    psi /= np.linalg.norm(psi)
    out = propagate_u2(gen, psi, 1.0)
    want = free_phase_apply(gen, psi, 1.0, sign=-1)
    assert np.linalg.norm(out - want) < 1e-10


def test_u2_autonomous_expm_oracle(space1, rng):
    # time-independent quadratic: V2(t) = V^(2), one-shot exponential exact
    sym = Symbol(1, {2: np.array([0.35 + 0j])})
    traj = evolve_classical(space1, sym, np.array([0.5 + 0j]), 1.0,
                            nsteps=300, richardson=False)
    n_max = 24
    gen = build_quadratic_generator(space1, traj, n_max)
    assert float(np.max(np.abs(traj.v2_arrays - traj.v2_arrays[0]))) < 1e-14
    params1 = FockParams(1, n_max, 1.0)
    psi = rng.normal(size=params1.dim) + 1j * rng.normal(size=params1.dim)
    psi /= np.linalg.norm(psi)
    out = propagate_u2(gen, psi, 1.0)
    H2 = gen.h2_matrix(0.0).to_dense()
    want = expm(-1j * H2) @ psi
    assert np.linalg.norm(out - want) < 1e-8


def test_u2_eps_independence(quartic_gen):
    h_a = quartic_gen.h2_matrix(0.5, 0.1).mat / 0.1
    h_b = quartic_gen.h2_matrix(0.5, 0.01).mat / 0.01
    assert abs(h_a - h_b).max() <= 1e-12


def test_u2_unitarity_and_cocycle(quartic_gen, rng):
    params1 = FockParams(1, 50, 1.0)
    psi = rng.normal(size=params1.dim) + 1j * rng.normal(size=params1.dim)
    psi /= np.linalg.norm(psi)
    full = propagate_u2(quartic_gen, psi, 1.0)
    assert abs(np.linalg.norm(full) - 1.0) < 1e-9
    # adjoint inverts the discrete propagator step for step
    back = propagate_u2_adjoint(quartic_gen, full, 1.0)
    assert np.linalg.norm(back - psi) < 1e-9


def test_u2_solve_counter(quartic_gen):
    params1 = FockParams(1, 50, 1.0)
    before = quartic_gen.solve_count
    from focklab.quadratic import u2_family

    states = u2_family(quartic_gen, vacuum(params1).coeffs, [0.5, 1.0])
    assert quartic_gen.solve_count == before + 1
    assert len(states) == 2


def test_beta_free_identity(space1):
    gen = _free_gen(space1)
    beta = symplectic_beta(gen, 1.0)
    np.testing.assert_allclose(beta.mat, np.eye(2), atol=1e-12)


def test_beta_symplectic(quartic_gen, rng):
    beta = symplectic_beta(quartic_gen, 1.0)
    assert beta.symplectic_defect() <= 1e-9
    for _ in range(5):
        xi = rng.normal(size=1) + 1j * rng.normal(size=1)
        eta = rng.normal(size=1) + 1j * rng.normal(size=1)
        a = np.imag(np.vdot(beta.apply(xi), beta.apply(eta)))
        b = np.imag(np.vdot(xi, eta))
        assert abs(a - b) <= 1e-9


def test_beta_autonomous_expm_oracle(space1):
    sym = Symbol(1, {2: np.array([0.35 + 0j])})
    traj = evolve_classical(space1, sym, np.array([0.5 + 0j]), 1.0,
                            nsteps=400, richardson=False)
    gen = build_quadratic_generator(space1, traj, 12)
    beta = symplectic_beta(gen, 1.0)
    m2 = two_tensor_matrix(traj.v2_arrays[0], 1).real
    # independent check: fine product integral of the frozen-time
    # real-linear generator exponentials
    B = np.eye(2)
    n = 4000
    dt = 1.0 / n
    for k in range(n):
        t = (k + 0.5) * dt
        G = np.zeros((2, 2))
        for col, e in enumerate(np.eye(2)):
            xi = e[0] + 1j * e[1]
            y = np.exp(-1j * t) * xi + np.exp(1j * t) * np.conj(xi)
            dxi = -1j * math.sqrt(2) * np.exp(1j * t) * (m2[0, 0] * y)
            G[0, col], G[1, col] = dxi.real, dxi.imag
        B = expm(dt * G) @ B
    np.testing.assert_allclose(beta.mat, B, atol=1e-7)


def test_bogoliubov_zero_displacement(quartic_gen):
    # both sides are the identity; what remains is the Krylov tolerance
    # accumulated over the forward/adjoint round trip
    params = FockParams(1, 50, 0.1)
    resid = bogoliubov_residual(quartic_gen, np.zeros(1, complex), 1.0,
                                [vacuum(FockParams(1, 50, 1.0)).coeffs], params)
    assert resid < 1e-9


def test_bogoliubov_free(space1, rng):
    gen = _free_gen(space1, n_max=20)
    params = FockParams(1, 20, 0.2)
    psi = vacuum(FockParams(1, 20, 1.0)).coeffs
    resid = bogoliubov_residual(gen, np.array([1.0 + 0j]), 1.0, [psi], params)
    assert resid < 1e-7


def test_bogoliubov_quartic(quartic_gen, rng):
    params = FockParams(1, 50, 0.1)
    params1 = FockParams(1, 50, 1.0)
    states = [vacuum(params1).coeffs]
    extra = np.zeros(params1.dim, complex)
    extra[:5] = rng.normal(size=5) + 1j * rng.normal(size=5)
    states.append(extra / np.linalg.norm(extra))
    resid = bogoliubov_residual(quartic_gen, np.array([0.3 + 0.1j]), 1.0, states, params)
    assert resid <= 1e-5
