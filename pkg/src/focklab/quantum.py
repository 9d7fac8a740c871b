"""Full quantum dynamics e^{-itH/eps} and the Hepp-limit observable."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import FockParams, SparseOperator, coherent, dgamma, vacuum, weyl_apply
from .hilbert import OneParticleSpace
from .lanczos import expm_multiply_hermitian
from .wick import Symbol, wick_matrix


@dataclass
class QuantumSystem:
    """H = dGamma(A) + F_V^Wick on a fixed truncation, Hermitian by construction."""

    space: OneParticleSpace
    symbol: Symbol
    params: FockParams
    H: SparseOperator = field(init=False, repr=False)
    norm_estimate: float = field(init=False)
    spectral_floor: float = field(init=False)

    def __post_init__(self):
        if not self.symbol.is_real:
            raise ValueError("Hamiltonian symbol must be real")
        mat = dgamma(self.space.A, self.params).mat + wick_matrix(self.symbol, self.params).mat
        self.H = SparseOperator(mat.tocsr(), hermitian=True)
        self.norm_estimate = float(np.max(np.abs(self.H.mat).sum(axis=1)))
        if self.params.dim >= 4:
            floor = sp.linalg.eigsh(self.H.mat, k=1, which="SA",
                                    return_eigenvectors=False, maxiter=2000)
            self.spectral_floor = float(floor[0])
        else:
            self.spectral_floor = float(np.linalg.eigvalsh(self.H.to_dense()).min())


def build_quantum_system(space: OneParticleSpace, V: Symbol, params: FockParams) -> QuantumSystem:
    return QuantumSystem(space, V, params)


def evolve_quantum(sys: QuantumSystem, psi0: np.ndarray, t: float, *,
                   tol: float = 1e-10) -> np.ndarray:
    """e^{-i t H / eps} psi0 by Lanczos stepping; step count scales like 1/eps."""
    psi0 = np.asarray(psi0, dtype=complex)
    if t == 0:
        return psi0.copy()
    return expm_multiply_hermitian(sys.H.mat, psi0, -1j * t / sys.params.epsilon,
                                   tol=tol, norm_estimate=sys.norm_estimate)


def energy_expectation(sys: QuantumSystem, psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, sys.H.mat @ psi)))


def displaced_state(sys: QuantumSystem, phi0: np.ndarray, psi_spec: np.ndarray | None, *,
                    tail_threshold: float = 1e-6) -> np.ndarray:
    """W(-i sqrt(2)/eps phi0) Psi; closed form when Psi is the vacuum."""
    if psi_spec is None:
        return coherent(phi0, sys.params, tail_threshold=tail_threshold).coeffs
    f = -1j * math.sqrt(2) / sys.params.epsilon * np.asarray(phi0, dtype=complex)
    return weyl_apply(f, np.asarray(psi_spec, dtype=complex), sys.params)


def hepp_expectation(sys: QuantumSystem, phi0: np.ndarray, xi: np.ndarray, t: float,
                     psi: np.ndarray | None = None, *, tol: float = 1e-10) -> complex:
    """<Psi, W(-i sqrt2/eps phi0)* e^{itH/eps} W(xi) e^{-itH/eps} W(-i sqrt2/eps phi0) Psi>.

    Computed by two evolutions and three Weyl applications; Psi defaults
    to the vacuum.
    """
    params = sys.params
    base = vacuum(params).coeffs if psi is None else np.asarray(psi, dtype=complex)
    f0 = -1j * math.sqrt(2) / params.epsilon * np.asarray(phi0, dtype=complex)
    v = displaced_state(sys, phi0, psi)
    v = evolve_quantum(sys, v, t, tol=tol)
    v = weyl_apply(np.asarray(xi, dtype=complex), v, params)
    v = evolve_quantum(sys, v, -t, tol=tol)
    v = weyl_apply(-f0, v, params)
    return complex(np.vdot(base, v))


def free_overlap_weyl(params: FockParams, xi: np.ndarray) -> complex:
    """Vacuum expectation <Omega, W(xi) Omega> = e^{-eps |xi|^2 / 4}, exact."""
    return complex(math.exp(-params.epsilon * float(np.vdot(xi, xi).real) / 4.0))
