import math

import numpy as np
import pytest
from scipy.linalg import expm

from focklab import (
    FockParams,
    Symbol,
    coherent,
    evolve_quantum,
    hepp_expectation,
    vacuum,
    weyl,
)
from focklab.invariants import random_symbol
from focklab.quantum import QuantumSystem, energy_expectation, free_overlap_weyl


@pytest.fixture
def quartic_sys(space1, quartic):
    params = FockParams(1, 60, 0.2)
    return QuantumSystem(space1, quartic, params)


def test_hermitian_and_floor(quartic_sys):
    dev = abs(quartic_sys.H.mat - quartic_sys.H.mat.conj().T).max()
    assert dev < 1e-12
    dense = np.linalg.eigvalsh(quartic_sys.H.to_dense())
    assert quartic_sys.spectral_floor == pytest.approx(dense.min(), abs=1e-8)


def test_t_zero_identity(quartic_sys):
    psi = coherent(np.array([0.6 + 0j]), quartic_sys.params).coeffs
    out = evolve_quantum(quartic_sys, psi, 0.0)
    np.testing.assert_array_equal(out, psi)


def test_free_field_coherent_transport(space1):
    params = FockParams(1, 40, 0.2)
    sys = QuantumSystem(space1, Symbol(1, {}), params)
    z = np.array([0.8 + 0.2j])
    psi = coherent(z, params).coeffs
    out = evolve_quantum(sys, psi, 1.3)
    target = coherent(space1.exp_A(1.3) @ z, params).coeffs
    # free evolution of a coherent state is exactly the rotated coherent state
    assert np.linalg.norm(out - target) < 1e-9
    assert abs(abs(np.vdot(target, out)) - 1) < 1e-7


def test_matches_dense_expm(space2, rng):
    sym = random_symbol(rng, 2, 3, scale=0.2)
    params = FockParams(2, 8, 0.25)
    sys = QuantumSystem(space2, sym, params)
    psi = rng.normal(size=params.dim) + 1j * rng.normal(size=params.dim)
    psi /= np.linalg.norm(psi)
    out = evolve_quantum(sys, psi, 0.8)
    want = expm(-1j * 0.8 / params.epsilon * sys.H.to_dense()) @ psi
    assert np.linalg.norm(out - want) < 1e-9


def test_norm_and_energy_conservation(quartic_sys):
    psi = coherent(np.array([1.0 + 0j]), quartic_sys.params).coeffs
    out = evolve_quantum(quartic_sys, psi, 1.0)
    assert abs(np.linalg.norm(out) - np.linalg.norm(psi)) < 1e-9
    e0 = energy_expectation(quartic_sys, psi)
    e1 = energy_expectation(quartic_sys, out)
    assert abs(e1 - e0) / (1 + abs(e0)) < 1e-8


def test_hepp_xi_zero(quartic_sys):
    val = hepp_expectation(quartic_sys, np.array([0.6 + 0j]), np.zeros(1, complex), 0.7)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_hepp_t_zero(space1, quartic):
    # t=0: expectation reduces to e^{i sqrt2 Re<xi, phi0>} <Omega, W(xi) Omega>
    # by the Weyl product phases; checked against a direct matrix computation
    eps = 0.25
    params = FockParams(1, 45, eps)
    sys = QuantumSystem(space1, quartic, params)
    phi0 = np.array([0.7 + 0j])
    xi = np.array([0.4 - 0.3j])
    got = hepp_expectation(sys, phi0, xi, 0.0)
    f0 = -1j * math.sqrt(2) / eps * phi0
    Wf = weyl(f0, params).mat
    Wxi = weyl(xi, params).mat
    vac = vacuum(params).coeffs
    direct = np.vdot(Wf @ vac, Wxi @ (Wf @ vac))
    assert got == pytest.approx(direct, abs=1e-8)
    phase = np.exp(1j * math.sqrt(2) * np.real(np.vdot(xi, phi0)))
    closed = phase * free_overlap_weyl(params, xi)
    assert got == pytest.approx(closed, abs=1e-6)


def test_hepp_free_field_closed_form(space1):
    eps = 0.2
    params = FockParams(1, 50, eps)
    sys = QuantumSystem(space1, Symbol(1, {}), params)
    phi0 = np.array([0.8 + 0j])
    xi = np.array([0.3 + 0.1j])
    t = 0.9
    got = hepp_expectation(sys, phi0, xi, t)
    phi_t = space1.exp_A(t) @ phi0
    want = np.exp(1j * math.sqrt(2) * np.real(np.vdot(xi, phi_t))) \
        * free_overlap_weyl(params, xi)
    assert got == pytest.approx(want, abs=1e-8)
