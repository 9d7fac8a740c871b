"""Finite-dimensional one-particle space.

The one-particle space is C^d with the inner product antilinear in the
left argument.  The computational basis is declared conjugation-real:
complex conjugation acts entrywise, so real-coordinate vectors form the
real subspace and a one-particle energy commuting with the conjugation
must have real entries.  One-particle vectors are plain complex numpy
arrays throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import H1ViolationError

HERMITICITY_TOL = 1e-12


def inner(f: np.ndarray, g: np.ndarray) -> complex:
    """Inner product, antilinear in the left argument."""
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape:
        raise ValueError(f"dimension mismatch: {f.shape} vs {g.shape}")
    return complex(np.vdot(f, g))


def conjugate(f: np.ndarray) -> np.ndarray:
    """Entrywise complex conjugation (the fixed conjugation of the basis)."""
    return np.conj(np.asarray(f))


def validate_h1(A: np.ndarray) -> float:
    """Check that A is real symmetric with strictly positive spectrum.

    Returns the spectral lower bound m.  Raises H1ViolationError naming
    the violated clause otherwise.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise H1ViolationError("A is not a square matrix")
    if np.max(np.abs(A - A.conj().T)) > HERMITICITY_TOL:
        raise H1ViolationError("A is not Hermitian to 1e-12")
    if np.max(np.abs(A.imag)) > HERMITICITY_TOL:
        raise H1ViolationError("A does not commute with the conjugation (complex entries)")
    m = float(np.linalg.eigvalsh(A.real).min())
    if m <= 0:
        raise H1ViolationError(f"spectrum not >= m>0 (min eigenvalue {m:.3e})")
    return m


@dataclass(frozen=True)
class OneParticleSpace:
    """d modes with a validated real-symmetric energy A >= m > 0.

    Spectral data is cached at construction; exp_A(t) returns e^{-itA}.
    Immutable after construction, safe for concurrent reads.
    """

    A: np.ndarray
    m: float = field(init=False)
    d: int = field(init=False)
    _eigvals: np.ndarray = field(init=False, repr=False)
    _eigvecs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, copy=True)
        m = validate_h1(A)
        w, Q = np.linalg.eigh(A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "d", A.shape[0])
        object.__setattr__(self, "_eigvals", w)
        object.__setattr__(self, "_eigvecs", Q)

    def exp_A(self, t: float) -> np.ndarray:
        """Free one-particle flow e^{-itA} (complex symmetric matrix)."""
        phases = np.exp(-1j * t * self._eigvals)
        return (self._eigvecs * phases) @ self._eigvecs.T
