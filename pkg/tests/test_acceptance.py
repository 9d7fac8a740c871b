"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Heavy artifacts (the quartic scaling sweep) are computed once per
session.  Tolerances are the contract values, not calibration knobs.
"""

import json
import math
import time

import numpy as np
import pytest

from focklab import (
    FockParams,
    OneParticleSpace,
    bogoliubov_residual,
    build_quadratic_generator,
    coherent,
    evolve_classical,
    evolve_quantum,
    symplectic_beta,
    vacuum,
    wick_matrix,
    wick_matrix_reference,
)
from focklab.experiments import load_config, run_hepp, run_scaling
from focklab.fock import n_max_for_tail, weyl_apply
from focklab.invariants import random_symbol
from focklab.quantum import QuantumSystem, energy_expectation
from focklab.wick import (
    check_estana_bound,
    check_number_estimate,
    eval_symbol,
    grad_zbar,
    occupations_of_degree,
    omega_integrand,
    quadratic_part,
    remainder_symbol,
    symbol_monomials,
    translate_symbol,
)
from tests.conftest import quartic_symbol
from tests.test_experiments import write_config, write_model

CONFIG = "configs/quartic.json"


def report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{status}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def scaling_result():
    t0 = time.time()
    cfg = load_config(CONFIG)
    result = run_scaling(cfg, out_dir="/tmp/focklab_acceptance")
    return result, time.time() - t0


def test_criterion_1_sqrt_eps_rate(scaling_result):
    result, elapsed = scaling_result
    slope, resid = result.slopes[1.0]
    ok = slope >= 0.45 and resid < 0.15 and not result.invalid and elapsed <= 600
    report(1, ok, f"slope={slope:.4f} (>=0.45), rms residual={resid:.4f} (<0.15), "
                  f"runtime={elapsed:.1f}s (<=600)")


def test_criterion_2_null_tests(tmp_path):
    t0 = time.time()
    # V = 0: the whole pipeline is exact up to integrator and truncation noise
    model = {"d": 1, "A": [[1.0, 0.0]], "symbol": {"d": 1, "tensors": []}}
    (tmp_path / "free.json").write_text(json.dumps(model))
    cfg = load_config(write_config(tmp_path, model_name="free.json",
                                   epsilons=[0.4, 0.2, 0.1, 0.05], steps=2000))
    free_errs = [r["error"] for r in run_scaling(cfg, str(tmp_path / "f")).rows]
    # quadratic V: remainder symbol vanishes, ansatz exact
    write_model(tmp_path / "quad.json", coupling=0.3, degree4=False)
    cfg = load_config(write_config(tmp_path, model_name="quad.json",
                                   epsilons=[0.4, 0.2, 0.1, 0.05], steps=2000))
    quad_errs = [r["error"] for r in run_scaling(cfg, str(tmp_path / "q")).rows]
    elapsed = time.time() - t0
    ok = (max(free_errs) < 1e-6 and max(quad_errs) < 1e-5 and elapsed < 60)
    report(2, ok, f"V=0 max error={max(free_errs):.2e} (<1e-6), "
                  f"quadratic max error={max(quad_errs):.2e} (<1e-5), "
                  f"runtime={elapsed:.1f}s (<60)")


def test_criterion_3_hepp_limit():
    cfg = load_config(CONFIG)
    rows = run_hepp(cfg, out_dir="/tmp/focklab_acceptance")
    errs = [r["abs_error"] for r in sorted(rows, key=lambda r: -r["epsilon"])]
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    report(3, decreasing, "hepp |expectation - target| strictly decreasing: "
           + ", ".join(f"{e:.3e}" for e in errs))


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(41)
    worst = 0.0
    cases = 0
    for trial in range(100):
        d = 1 + trial % 2
        params = FockParams(d, 4, 0.25)
        sym = random_symbol(rng, d, 3, real=False)
        dev = float(np.max(np.abs(wick_matrix(sym, params).mat.toarray()
                                  - wick_matrix_reference(sym, params))))
        worst = max(worst, dev)
        cases += 1
    report(4, worst <= 1e-12, f"{cases} random symbols, worst entrywise dev={worst:.2e}"
                              " (<=1e-12)")


def test_criterion_5_translation_identity():
    rng = np.random.default_rng(51)
    worst_pt = 0.0
    for _ in range(100):
        d = 1 + int(rng.integers(0, 2))
        sym = random_symbol(rng, d, 3, real=False)
        phi = rng.normal(size=d) + 1j * rng.normal(size=d)
        z = rng.normal(size=d) + 1j * rng.normal(size=d)
        worst_pt = max(worst_pt, abs(eval_symbol(translate_symbol(sym, phi), z)
                                     - eval_symbol(sym, z + phi)))
    # operator-level shift residual on low-sector states
    eps = 0.2
    sym = random_symbol(rng, 1, 3, scale=0.4)
    phi = np.array([0.35])
    n_max = n_max_for_tail(2.0 * 0.35 + 1.5, eps, 1e-16) + 3
    params = FockParams(1, n_max, eps)
    f = -1j * math.sqrt(2) / eps * (phi + 0j)
    fv = wick_matrix(sym, params).mat
    fv_shift = wick_matrix(translate_symbol(sym, phi), params).mat
    worst_op = 0.0
    for _ in range(6):
        psi = np.zeros(params.dim, complex)
        psi[:4] = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        lhs = weyl_apply(-f, fv @ weyl_apply(f, psi, params), params)
        worst_op = max(worst_op, float(np.linalg.norm(lhs - fv_shift @ psi)))
    ok = worst_pt <= 1e-10 and worst_op <= 1e-6
    report(5, ok, f"pointwise worst={worst_pt:.2e} (<=1e-10) over 100 cases, "
                  f"operator shift residual={worst_op:.2e} (<=1e-6)")


def test_criterion_6_expansion_identity():
    rng = np.random.default_rng(61)
    worst = 0.0
    worst_omega = 0.0
    for _ in range(100):
        d = 1 + int(rng.integers(0, 2))
        sym = random_symbol(rng, d, 4)
        phi = rng.normal(size=d) + 1j * rng.normal(size=d)
        rem = remainder_symbol(sym, phi)
        grad = grad_zbar(sym, phi)
        v2 = quadratic_part(sym, phi)
        occ2 = occupations_of_degree(d, 2)
        z = rng.normal(size=d) + 1j * rng.normal(size=d)
        w = z + np.conj(z)
        quad = sum(c * np.prod(w**mu)
                   / math.sqrt(math.prod(math.factorial(int(x)) for x in mu))
                   for c, mu in zip(v2, occ2))
        lhs = (eval_symbol(rem, z) + eval_symbol(sym, phi)
               + 2 * np.real(np.vdot(z, grad)) + quad)
        worst = max(worst, abs(lhs - eval_symbol(sym, z + phi)))
        a = omega_integrand(sym, phi)
        b = float(np.real(np.vdot(phi, grad))) - eval_symbol(sym, phi).real
        worst_omega = max(worst_omega, abs(a - b))
    ok = worst <= 1e-10 and worst_omega <= 1e-12
    report(6, ok, f"expansion residual={worst:.2e} (<=1e-10) over 100 quartic cases, "
                  f"omega dual form dev={worst_omega:.2e} (<=1e-12)")


def test_criterion_7_inequality_suites():
    rng = np.random.default_rng(71)
    params = FockParams(2, 6, 0.1)
    worst_ne = math.inf
    for _ in range(100):
        sym = random_symbol(rng, 2, int(rng.integers(1, 4)), real=False)
        monos = symbol_monomials(sym)
        p, q, bt = monos[rng.integers(0, len(monos))]
        psi = rng.normal(size=params.dim) + 1j * rng.normal(size=params.dim)
        phi = rng.normal(size=params.dim) + 1j * rng.normal(size=params.dim)
        worst_ne = min(worst_ne, check_number_estimate(
            bt, p, q, psi / np.linalg.norm(psi), phi / np.linalg.norm(phi), params))
    worst_es = math.inf
    for _ in range(100):
        sym = random_symbol(rng, 2, 3, real=False)
        psi = rng.normal(size=params.dim) + 1j * rng.normal(size=params.dim)
        worst_es = min(worst_es, check_estana_bound(sym, psi / np.linalg.norm(psi), params))
    ok = worst_ne >= -1e-10 and worst_es >= -1e-10
    report(7, ok, f"number estimate min margin={worst_ne:.2e}, "
                  f"estana (eps=0.1) min margin={worst_es:.2e} (both >= -1e-10, 100 each)")


def test_criterion_8_bogoliubov():
    space = OneParticleSpace(np.array([[1.0]]))
    quartic = quartic_symbol()
    traj = evolve_classical(space, quartic, np.array([1.0 + 0j]), 1.0, richardson=False)
    n_max = 50  # top-two-sector mass of the squeezed test states < 1e-10
    gen = build_quadratic_generator(space, traj, n_max)
    beta = symplectic_beta(gen, 1.0)
    sympl = beta.symplectic_defect()
    rng = np.random.default_rng(81)
    params1 = FockParams(1, n_max, 1.0)
    states = [vacuum(params1).coeffs]
    extra = np.zeros(params1.dim, complex)
    extra[:5] = rng.normal(size=5) + 1j * rng.normal(size=5)
    states.append(extra / np.linalg.norm(extra))
    resid = bogoliubov_residual(gen, np.array([0.3 + 0.1j]), 1.0, states,
                                FockParams(1, n_max, 0.1))
    ok = resid <= 1e-5 and sympl <= 1e-9
    report(8, ok, f"conjugation residual={resid:.2e} (<=1e-5), "
                  f"symplectic form defect={sympl:.2e} (<=1e-9)")


def test_criterion_9_conservation():
    space = OneParticleSpace(np.array([[1.0]]))
    quartic = quartic_symbol()
    traj = evolve_classical(space, quartic, np.array([1.0 + 0j]), 5.0, richardson=False)
    class_drift = float(np.max(np.abs(traj.energy - traj.energy[0]))) / (
        1 + abs(traj.energy[0]))
    eps = 0.2
    n_max = n_max_for_tail(2 * traj.max_amplitude(), eps, 1e-10)
    params = FockParams(1, n_max, eps)
    sys = QuantumSystem(space, quartic, params)
    psi0 = coherent(np.array([1.0 + 0j]), params).coeffs
    psi1 = evolve_quantum(sys, psi0, 1.0)
    q_drift = abs(energy_expectation(sys, psi1) - energy_expectation(sys, psi0)) / (
        1 + abs(energy_expectation(sys, psi0)))
    q_norm = abs(float(np.linalg.norm(psi1)) - float(np.linalg.norm(psi0)))
    gen = build_quadratic_generator(space,
                                    evolve_classical(space, quartic,
                                                     np.array([1.0 + 0j]), 1.0,
                                                     richardson=False), 40)
    from focklab.quadratic import propagate_u2

    u2psi = propagate_u2(gen, vacuum(FockParams(1, 40, 1.0)).coeffs, 1.0)
    u2_drift = abs(float(np.linalg.norm(u2psi)) - 1.0)
    ok = class_drift <= 1e-8 and q_drift <= 1e-8 and q_norm <= 1e-9 and u2_drift <= 1e-9
    report(9, ok, f"classical energy drift={class_drift:.2e} (<=1e-8, T=5), "
                  f"quantum energy drift={q_drift:.2e} (<=1e-8), "
                  f"norm drifts={q_norm:.2e}/{u2_drift:.2e} (<=1e-9 per unit time)")


def test_criterion_10_u2_eps_independence():
    space = OneParticleSpace(np.array([[1.0]]))
    quartic = quartic_symbol()
    traj = evolve_classical(space, quartic, np.array([1.0 + 0j]), 1.0,
                            nsteps=200, richardson=False)
    gen = build_quadratic_generator(space, traj, 30)
    h_a = gen.h2_matrix(0.5, 0.1).mat / 0.1
    h_b = gen.h2_matrix(0.5, 0.01).mat / 0.01
    dev = float(abs(h_a - h_b).max())
    report(10, dev <= 1e-12, f"H2/eps entrywise agreement at eps=0.1 vs 0.01: "
                             f"dev={dev:.2e} (<=1e-12)")
