"""Time-dependent quadratic propagator along a classical orbit.

U2(t,s) solves i eps d/dt u = (dGamma(A) + F_{V2(t)}^Wick) u.  Both
generator pieces divided by eps are eps-free, so everything here is
assembled once with unit scaling and reused across a sweep.  The
one-particle companion beta(t,s) is the symplectic (R-linear) flow

    i d/dt xi = sqrt(2) e^{itA} M2(t) (e^{-itA} xi + e^{itA} conj(xi)),

M2(t) the matrix form of V2(t); conjugating Weyl operators by the
interaction-picture propagator Utilde2 = e^{it dGamma(A)/eps} U2 moves
their argument through beta, which is the consistency check exercised
by bogoliubov_residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .classical import ClassicalTrajectory
from .fock import FockParams, SparseOperator, dgamma, occupations_of_degree, weyl_apply
from .hilbert import OneParticleSpace
from .lanczos import expm_multiply_hermitian
from .wick import Symbol, two_tensor_matrix, wick_matrix

DEFAULT_SUBSTEPS = 2


@dataclass
class QuadraticGenerator:
    """Cached unit-scaled generator data H2(t) = dGamma(A) + V2(t)-Wick."""

    space: OneParticleSpace
    traj: ClassicalTrajectory
    n_max: int
    substeps: int = DEFAULT_SUBSTEPS
    h_free: sp.csr_matrix = field(init=False, repr=False)
    k_ops: list = field(init=False, repr=False)
    norm_bound: float = field(init=False)
    solve_count: int = 0

    def __post_init__(self):
        params1 = FockParams(self.space.d, self.n_max, 1.0)
        self.h_free = dgamma(self.space.A, params1).mat
        occ2 = occupations_of_degree(self.space.d, 2)
        self.k_ops = []
        for i in range(occ2.shape[0]):
            coeffs = np.zeros(occ2.shape[0], dtype=complex)
            coeffs[i] = 1.0
            basis2 = Symbol(self.space.d, {2: coeffs})
            self.k_ops.append(wick_matrix(basis2, params1).mat)
        kn = max(float(np.max(np.abs(K).sum(axis=1))) for K in self.k_ops)
        v2max = float(np.max(self.traj.v2_norms))
        self.norm_bound = float(np.max(np.abs(self.h_free).sum(axis=1))) + \
            occ2.shape[0] * v2max * kn
        if np.max(np.abs(self.traj.v2_arrays.imag)) > 1e-12:
            raise ValueError("quadratic part along the orbit is not real")

    @property
    def params1(self) -> FockParams:
        return FockParams(self.space.d, self.n_max, 1.0)

    def h2_at(self, v2_coeffs: np.ndarray) -> sp.csr_matrix:
        mat = self.h_free
        for c, K in zip(v2_coeffs, self.k_ops):
            if c != 0:
                mat = mat + float(c.real) * K
        return mat

    def h2_matrix(self, t: float, epsilon: float = 1.0) -> SparseOperator:
        """dGamma(A) + wick(V2(t)) at the given eps (grid times only)."""
        k = self.traj.index_of(t)
        mat = epsilon * self.h2_at(self.traj.v2_arrays[k])
        return SparseOperator(mat.tocsr(), hermitian=True)


def build_quadratic_generator(space: OneParticleSpace, traj: ClassicalTrajectory,
                              n_max: int, substeps: int = DEFAULT_SUBSTEPS) -> QuadraticGenerator:
    return QuadraticGenerator(space, traj, n_max, substeps)


def propagate_u2(gen: QuadraticGenerator, psi: np.ndarray, t: float, *,
                 tol: float = 1e-11) -> np.ndarray:
    """U2(t,0) psi by exponential-midpoint steps on the trajectory grid."""
    out = list(u2_family(gen, psi, [t], tol=tol))
    return out[0]


def u2_family(gen: QuadraticGenerator, psi: np.ndarray, times, *, tol: float = 1e-11):
    """One forward pass returning U2(t,0) psi at every requested grid time.

    Counts as a single quadratic solve regardless of how many output
    times or sweep points share it.
    """
    gen.solve_count += 1
    wanted = sorted(times)
    idx = [gen.traj.index_of(t) for t in wanted]
    dt = gen.traj.dt
    sub = gen.substeps
    cur = np.asarray(psi, dtype=complex).copy()
    results = {}
    if idx and idx[0] == 0:
        results[0] = cur.copy()
    last = max(idx) if idx else 0
    v2 = gen.traj.v2_arrays
    for k in range(last):
        for s in range(sub):
            frac = (s + 0.5) / sub
            coeffs = (1 - frac) * v2[k] + frac * v2[k + 1]
            H2 = gen.h2_at(coeffs)
            cur = expm_multiply_hermitian(H2, cur, -1j * dt / sub, tol=tol,
                                          norm_estimate=gen.norm_bound)
        if (k + 1) in idx:
            results[k + 1] = cur.copy()
    return [results[gen.traj.index_of(t)] for t in times]


def propagate_u2_adjoint(gen: QuadraticGenerator, psi: np.ndarray, t: float, *,
                         tol: float = 1e-11) -> np.ndarray:
    """U2(0,t) psi: the exact discrete adjoint, steps replayed in reverse."""
    k_end = gen.traj.index_of(t)
    dt = gen.traj.dt
    sub = gen.substeps
    v2 = gen.traj.v2_arrays
    cur = np.asarray(psi, dtype=complex).copy()
    for k in range(k_end - 1, -1, -1):
        for s in range(sub - 1, -1, -1):
            frac = (s + 0.5) / sub
            coeffs = (1 - frac) * v2[k] + frac * v2[k + 1]
            H2 = gen.h2_at(coeffs)
            cur = expm_multiply_hermitian(H2, cur, 1j * dt / sub, tol=tol,
                                          norm_estimate=gen.norm_bound)
    return cur


def free_phase_apply(gen: QuadraticGenerator, psi: np.ndarray, t: float, *,
                     sign: int = 1, tol: float = 1e-12) -> np.ndarray:
    """e^{sign * i t dGamma(A)} psi with unit scaling."""
    return expm_multiply_hermitian(gen.h_free, psi, sign * 1j * t, tol=tol)


@dataclass(frozen=True)
class SymplecticMap:
    """2d x 2d real matrix acting on (Re xi, Im xi) stacked."""

    mat: np.ndarray

    @property
    def d(self) -> int:
        return self.mat.shape[0] // 2

    def apply(self, xi: np.ndarray) -> np.ndarray:
        v = np.concatenate([xi.real, xi.imag])
        out = self.mat @ v
        return out[: self.d] + 1j * out[self.d:]

    def symplectic_defect(self) -> float:
        """Max deviation of B^T J B from J, J the form Im<.,.>."""
        d = self.d
        J = np.block([[np.zeros((d, d)), np.eye(d)], [-np.eye(d), np.zeros((d, d))]])
        return float(np.max(np.abs(self.mat.T @ J @ self.mat - J)))

    def compose(self, other: "SymplecticMap") -> "SymplecticMap":
        return SymplecticMap(self.mat @ other.mat)


def _beta_rhs(space: OneParticleSpace, m2: np.ndarray, t: float, B: np.ndarray) -> np.ndarray:
    d = space.d
    rot_m = space.exp_A(t)        # e^{-itA}
    rot_p = space.exp_A(-t)       # e^{+itA}
    out = np.empty_like(B)
    for col in range(2 * d):
        xi = B[:d, col] + 1j * B[d:, col]
        y = rot_m @ xi + rot_p @ np.conj(xi)
        dxi = -1j * math.sqrt(2) * (rot_p @ (m2 @ y))
        out[:d, col] = dxi.real
        out[d:, col] = dxi.imag
    return out


def symplectic_beta(gen: QuadraticGenerator, t: float, *, t_start: float = 0.0) -> SymplecticMap:
    """beta(t, t_start) by RK4 on the real-linear one-particle flow.

    The quadratic coefficient is interpolated linearly between grid
    samples at interior stage times.
    """
    traj = gen.traj
    k0, k1 = traj.index_of(t_start), traj.index_of(t)
    if k1 < k0:
        raise ValueError("need t >= t_start")
    d = gen.space.d
    dt = traj.dt
    m2_grid = [two_tensor_matrix(traj.v2_arrays[k], d).real for k in range(len(traj.times))]

    def m2_at(tq):
        k = min(int(tq / dt), len(traj.times) - 2)
        frac = (tq - traj.times[k]) / dt
        return (1 - frac) * m2_grid[k] + frac * m2_grid[k + 1]

    B = np.eye(2 * d)
    for k in range(k0, k1):
        t0 = traj.times[k]
        f = lambda tq, Bq: _beta_rhs(gen.space, m2_at(tq), tq, Bq)
        k1_ = f(t0, B)
        k2_ = f(t0 + dt / 2, B + dt / 2 * k1_)
        k3_ = f(t0 + dt / 2, B + dt / 2 * k2_)
        k4_ = f(t0 + dt, B + dt * k3_)
        B = B + dt / 6 * (k1_ + 2 * k2_ + 2 * k3_ + k4_)
    return SymplecticMap(B)


def bogoliubov_residual(gen: QuadraticGenerator, xi0: np.ndarray, t: float,
                        test_states, params: FockParams, *, tol: float = 1e-11) -> float:
    """Max defect of Utilde2(t,0) W(i xi0) Utilde2(0,t) = W(i beta(t,0) xi0).

    test_states are coefficient vectors on the params truncation, which
    must match the generator's cutoff.
    """
    if params.n_max != gen.n_max or params.d != gen.space.d:
        raise ValueError("params truncation must match the quadratic generator")
    xi0 = np.asarray(xi0, dtype=complex)
    beta = symplectic_beta(gen, t)
    xi_t = beta.apply(xi0)
    worst = 0.0
    for psi in test_states:
        psi = np.asarray(psi, dtype=complex)
        v = free_phase_apply(gen, psi, t, sign=-1, tol=tol)
        v = propagate_u2_adjoint(gen, v, t, tol=tol)
        v = weyl_apply(1j * xi0, v, params, tol=tol)
        v = propagate_u2(gen, v, t, tol=tol)
        v = free_phase_apply(gen, v, t, sign=+1, tol=tol)
        w = weyl_apply(1j * xi_t, psi, params, tol=tol)
        worst = max(worst, float(np.linalg.norm(v - w)))
    return worst
