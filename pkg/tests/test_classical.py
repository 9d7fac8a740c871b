import math

import numpy as np
import pytest
from scipy.linalg import expm

from focklab import (
    BlowUpError,
    HorizonError,
    Symbol,
    energy,
    evolve_classical,
    picard_oracle,
    symbol_from_entries,
)
from focklab.classical import norm_bound_margin, trajectory_to_csv
from focklab.invariants import random_symbol
from focklab.wick import omega_integrand, two_tensor_matrix
from tests.conftest import quartic_symbol


def test_free_flow(space2):
    phi0 = np.array([0.8 + 0.1j, -0.3j])
    traj = evolve_classical(space2, Symbol(2, {}), phi0, 10.0, richardson=False)
    for k in (500, 2000):
        t = traj.times[k]
        np.testing.assert_allclose(traj.phi[k], space2.exp_A(t) @ phi0, atol=1e-10)


def test_quadratic_matches_linear_system_oracle(space2, rng):
    # quadratic symbol: i dphi/dt = A phi + sqrt(2) M (phi + conj phi),
    # an R-linear ODE solved exactly by a 4x4 real matrix exponential
    sym = Symbol(2, {2: random_symbol(rng, 2, 2, scale=0.4).degree(2)})
    M = two_tensor_matrix(sym.degree(2), 2).real
    phi0 = np.array([0.5 - 0.2j, 0.1 + 0.4j])
    T = 2.0
    traj = evolve_classical(space2, sym, phi0, T, richardson=False)

    d = 2
    A = space2.A
    L = np.zeros((2 * d, 2 * d))
    # d/dt (x, y) for phi = x + iy: i phi' = A phi + sqrt2 M (2x)
    # phi' = -i A (x+iy) - i 2 sqrt2 M x
    L[:d, :d] = np.zeros((d, d))
    L[:d, d:] = A
    L[d:, :d] = -A - 2 * math.sqrt(2) * M
    L[d:, d:] = np.zeros((d, d))
    vec0 = np.concatenate([phi0.real, phi0.imag])
    out = expm(T * L) @ vec0
    oracle = out[:d] + 1j * out[d:]
    np.testing.assert_allclose(traj.phi[-1], oracle, atol=1e-8)


def test_richardson_fourth_order(space1, quartic):
    phi0 = np.array([1.0 + 0j])
    coarse = evolve_classical(space1, quartic, phi0, 1.0, nsteps=100, richardson=False)
    fine = evolve_classical(space1, quartic, phi0, 1.0, nsteps=200, richardson=False)
    finest = evolve_classical(space1, quartic, phi0, 1.0, nsteps=400, richardson=False)
    ref = evolve_classical(space1, quartic, phi0, 1.0, nsteps=3200, richardson=False)
    e1 = np.linalg.norm(coarse.phi[-1] - ref.phi[-1])
    e2 = np.linalg.norm(fine.phi[-1] - ref.phi[-1])
    e3 = np.linalg.norm(finest.phi[-1] - ref.phi[-1])
    assert e1 / e2 > 10
    assert e2 / e3 > 10


def test_picard_free_is_exact(space2):
    phi0 = np.array([0.3 + 0.7j, -0.2 + 0j])
    end = picard_oracle(space2, Symbol(2, {}), phi0, 0.5, n_iter=1, quad_points=16)
    np.testing.assert_allclose(end, space2.exp_A(0.5) @ phi0, atol=1e-13)


def test_picard_agrees_with_rk4(space1, quartic):
    phi0 = np.array([1.0 + 0j])
    end, dists = picard_oracle(space1, quartic, phi0, 0.1, n_iter=14,
                               quad_points=400, return_distances=True)
    traj = evolve_classical(space1, quartic, phi0, 0.1, nsteps=400, richardson=False)
    assert np.linalg.norm(end - traj.phi[-1]) < 1e-6
    moving = [p for p in zip(dists, dists[1:]) if p[0] > 1e-13]
    assert all(a > b for a, b in moving)


def test_picard_horizon_error(space1):
    strong = quartic_symbol(coupling=4.0)
    with pytest.raises(HorizonError):
        picard_oracle(space1, strong, np.array([2.0 + 0j]), 3.0, n_iter=10,
                      quad_points=60)


def test_energy_values(space1, quartic):
    assert energy(space1, Symbol(1, {}), np.array([1.0 + 0j])) == pytest.approx(1.0)
    const = symbol_from_entries(1, [((0,), 2.5)])
    assert energy(space1, const, np.zeros(1, complex)) == pytest.approx(2.5)


def test_energy_conservation(space1, quartic):
    phi0 = np.array([1.0 + 0j])
    traj = evolve_classical(space1, quartic, phi0, 5.0, richardson=False)
    drift = np.max(np.abs(traj.energy - traj.energy[0]))
    assert drift < 1e-8 * (1 + abs(traj.energy[0]))


def test_omega_against_independent_quadrature(space1, quartic):
    phi0 = np.array([1.0 + 0j])
    traj = evolve_classical(space1, quartic, phi0, 2.0, richardson=False)
    vals = np.array([omega_integrand(quartic, p) for p in traj.phi])
    n = len(vals) - 1
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    simpson = float(vals @ w) * traj.dt / 3
    assert abs(simpson - traj.omega[-1]) < 1e-8


def test_interaction_picture_consistency(space1, quartic):
    phi0 = np.array([1.0 + 0j])
    traj = evolve_classical(space1, quartic, phi0, 1.0, nsteps=200, richardson=False)
    for k in (50, 200):
        t = traj.times[k]
        np.testing.assert_allclose(traj.phi_tilde[k],
                                   space1.exp_A(-t) @ traj.phi[k], atol=1e-12)


def test_blow_up_guard(space1):
    # negative quartic coefficient: classical escape in finite time
    bad = symbol_from_entries(1, [((4,), -math.sqrt(24.0) * 2)])
    with pytest.raises(BlowUpError):
        evolve_classical(space1, bad, np.array([2.0 + 0j]), 5.0, richardson=False)


def test_norm_bound_margin(space1, quartic):
    traj = evolve_classical(space1, quartic, np.array([1.0 + 0j]), 3.0, richardson=False)
    assert norm_bound_margin(traj, quartic) >= 0


def test_trajectory_csv(tmp_path, space2, rng):
    sym = Symbol(2, {2: random_symbol(rng, 2, 2, scale=0.2).degree(2)})
    traj = evolve_classical(space2, sym, np.array([0.4, 0.1j]), 0.5, nsteps=10,
                            richardson=False)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,re_phi_1,im_phi_1,re_phi_2,im_phi_2,omega,energy"
    assert len(lines) == 12
