"""Truncated symmetric Fock space over C^d.

Basis states are occupation multi-indices m = (m_1..m_d) with total
occupation at most n_max, ordered graded-lexicographically (grade
Sum m_j first, then ascending lex within a grade) so that particle
sectors are contiguous slices of the coefficient vector.  Creation and
annihilation carry the semiclassical scaling, [a_j, a*_k] = eps
delta_jk on every sector below the cutoff.
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammainc, gammaln

from .errors import CapacityError, TruncationError

MAX_DIM = 4_000_000
HERMITICITY_TOL = 1e-12


@functools.lru_cache(maxsize=None)
def occupations_of_degree(d: int, n: int) -> np.ndarray:
    """All occupation tuples with total n over d modes, ascending lex."""
    if d == 1:
        return np.array([[n]], dtype=np.int64)
    rows = []
    for first in range(n + 1):
        rest = occupations_of_degree(d - 1, n - first)
        block = np.empty((rest.shape[0], d), dtype=np.int64)
        block[:, 0] = first
        block[:, 1:] = rest
        rows.append(block)
    return np.vstack(rows)


@functools.lru_cache(maxsize=None)
def enumerate_basis(d: int, n_max: int, max_dim: int = MAX_DIM) -> np.ndarray:
    """Graded-lex occupation basis as an (dim, d) integer array."""
    if d < 1 or n_max < 0:
        raise ValueError("need d >= 1 and n_max >= 0")
    dim = math.comb(n_max + d, d)
    if dim > max_dim:
        raise CapacityError(f"dim {dim} exceeds budget {max_dim} (d={d}, n_max={n_max})")
    return np.vstack([occupations_of_degree(d, n) for n in range(n_max + 1)])


@functools.lru_cache(maxsize=None)
def rank_map(d: int, n_max: int) -> dict:
    basis = enumerate_basis(d, n_max)
    return {tuple(row): i for i, row in enumerate(basis)}


@functools.lru_cache(maxsize=None)
def sector_slices(d: int, n_max: int) -> tuple:
    """Slice of the coefficient vector holding each particle sector."""
    out = []
    start = 0
    for n in range(n_max + 1):
        size = math.comb(n + d - 1, d - 1)
        out.append(slice(start, start + size))
        start += size
    return tuple(out)


@functools.lru_cache(maxsize=None)
def sector_of_index(d: int, n_max: int) -> np.ndarray:
    basis = enumerate_basis(d, n_max)
    return basis.sum(axis=1)


@dataclass(frozen=True)
class FockParams:
    """Truncation geometry plus the semiclassical parameter."""

    d: int
    n_max: int
    epsilon: float

    def __post_init__(self):
        if self.d < 1 or self.n_max < 1:
            raise ValueError("need d >= 1 and n_max >= 1")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")

    @property
    def dim(self) -> int:
        return math.comb(self.n_max + self.d, self.d)

    def basis(self) -> np.ndarray:
        return enumerate_basis(self.d, self.n_max)

    def sectors(self) -> tuple:
        return sector_slices(self.d, self.n_max)


@dataclass(frozen=True)
class SparseOperator:
    """Sparse matrix on the truncated space with a verified Hermitian flag."""

    mat: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        if self.hermitian:
            diff = (self.mat - self.mat.conj().T).tocoo()
            dev = np.max(np.abs(diff.data)) if diff.nnz else 0.0
            if dev > HERMITICITY_TOL:
                raise ValueError(f"hermitian flag set but max deviation {dev:.2e}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.mat @ v

    def dagger(self) -> "SparseOperator":
        return SparseOperator(self.mat.conj().T.tocsr(), hermitian=self.hermitian)

    def to_dense(self) -> np.ndarray:
        return self.mat.toarray()


@dataclass
class FockVector:
    """Coefficient vector over the graded-lex occupation basis."""

    coeffs: np.ndarray
    params: FockParams

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def sector_masses(self) -> np.ndarray:
        slc = self.params.sectors()
        return np.array([float(np.sum(np.abs(self.coeffs[s]) ** 2)) for s in slc])

    def top_sector_mass(self, k: int = 2) -> float:
        """Probability mass in the top k occupation sectors."""
        return float(self.sector_masses()[-k:].sum())


def vacuum(params: FockParams) -> FockVector:
    c = np.zeros(params.dim, dtype=complex)
    c[0] = 1.0
    return FockVector(c, params)


def ladder(mode: int, kind: str, params: FockParams) -> SparseOperator:
    """Creation or annihilation on one mode (0-based) with sqrt(eps) scaling.

    create:     |m> -> sqrt(eps (m_j+1)) |m+delta_j|, zero when leaving the cutoff
    annihilate: |m> -> sqrt(eps m_j)     |m-delta_j|
    """
    if kind not in ("create", "annihilate"):
        raise ValueError(f"kind must be create|annihilate, got {kind!r}")
    if not 0 <= mode < params.d:
        raise ValueError(f"mode {mode} out of range for d={params.d}")
    basis = params.basis()
    ranks = rank_map(params.d, params.n_max)
    grades = sector_of_index(params.d, params.n_max)
    rows, cols, vals = [], [], []
    for i, m in enumerate(basis):
        if grades[i] == params.n_max:
            continue
        target = m.copy()
        target[mode] += 1
        j = ranks[tuple(target)]
        amp = math.sqrt(params.epsilon * (m[mode] + 1))
        rows.append(j)
        cols.append(i)
        vals.append(amp)
    create = sp.csr_matrix((vals, (rows, cols)), shape=(params.dim, params.dim), dtype=complex)
    if kind == "create":
        return SparseOperator(create)
    return SparseOperator(create.conj().T.tocsr())


def annihilate_vec(f: np.ndarray, params: FockParams) -> SparseOperator:
    """a(f) = sum_j conj(f_j) a_j, antilinear in f."""
    mats = [np.conj(f[j]) * ladder(j, "annihilate", params).mat for j in range(params.d)]
    return SparseOperator(sum(mats).tocsr())


def create_vec(f: np.ndarray, params: FockParams) -> SparseOperator:
    """a*(f) = sum_j f_j a*_j, linear in f; the matrix adjoint of a(f)."""
    mats = [f[j] * ladder(j, "create", params).mat for j in range(params.d)]
    return SparseOperator(sum(mats).tocsr())


def dgamma(A: np.ndarray, params: FockParams) -> SparseOperator:
    """Second quantization of A: eps * sum_jk A_jk a*_j a_k / eps-ladders.

    Sector preserving; Hermitian for Hermitian A.
    """
    A = np.asarray(A)
    basis = params.basis()
    ranks = rank_map(params.d, params.n_max)
    eps = params.epsilon
    diag = eps * basis @ np.real(np.diag(A))
    mat = sp.diags(diag.astype(complex), format="lil")
    offs = [(j, k) for j in range(params.d) for k in range(params.d)
            if j != k and A[j, k] != 0]
    for j, k in offs:
        for i, m in enumerate(basis):
            if m[k] == 0:
                continue
            target = m.copy()
            target[k] -= 1
            target[j] += 1
            r = ranks[tuple(target)]
            mat[r, i] += eps * A[j, k] * math.sqrt((m[j] + 1) * m[k])
    herm = np.max(np.abs(A - A.conj().T)) < HERMITICITY_TOL
    return SparseOperator(mat.tocsr(), hermitian=herm)


def number_operator(params: FockParams) -> SparseOperator:
    grades = sector_of_index(params.d, params.n_max)
    return SparseOperator(
        sp.diags((params.epsilon * grades).astype(complex), format="csr"), hermitian=True
    )


def gamma_scalar(c: float, params: FockParams) -> SparseOperator:
    """Scalar second quantization Gamma(c): diagonal c^n on sector n."""
    if c <= 0:
        raise ValueError("c must be positive")
    grades = sector_of_index(params.d, params.n_max)
    logs = grades * math.log(c)
    if np.max(logs) > 700:
        raise OverflowError(f"Gamma({c}) overflows at n_max={params.n_max}")
    return SparseOperator(sp.diags(np.exp(logs).astype(complex), format="csr"), hermitian=True)


def segal_field(f: np.ndarray, params: FockParams) -> SparseOperator:
    """Segal field (a*(f) + a(f)) / sqrt(2); exactly Hermitian in truncation."""
    mat = (create_vec(f, params).mat + annihilate_vec(f, params).mat) / math.sqrt(2)
    return SparseOperator(mat.tocsr(), hermitian=True)


WEYL_DENSE_LIMIT = 4096


def weyl(f: np.ndarray, params: FockParams, *, dense_limit: int = WEYL_DENSE_LIMIT) -> SparseOperator:
    """Weyl operator e^{i Phi_s(f)} as an explicit (dense-backed) matrix.

    Unitary on the truncated space since the generator is exactly
    Hermitian.  Beyond dense_limit use weyl_apply, which never forms
    the matrix.
    """
    if params.dim > dense_limit:
        raise CapacityError(
            f"dim {params.dim} too large for a dense Weyl matrix; use weyl_apply"
        )
    from scipy.linalg import expm

    gen = segal_field(f, params).mat.toarray()
    return SparseOperator(sp.csr_matrix(expm(1j * gen)))


def weyl_apply(f: np.ndarray, psi: np.ndarray, params: FockParams, *, tol: float = 1e-12) -> np.ndarray:
    """Apply W(f) to a state by Krylov exponentiation of the Segal generator."""
    from .lanczos import expm_multiply_hermitian

    gen = segal_field(f, params).mat
    return expm_multiply_hermitian(gen, psi, 1j, tol=tol)


def coherent_tail(z: np.ndarray, params: FockParams) -> float:
    """Exact Poisson tail mass above n_max for the coherent state at z.

    lambda = |z|^2 / eps; this upper-bounds the squared norm lost to
    truncation.
    """
    lam = float(np.vdot(z, z).real) / params.epsilon
    if lam == 0:
        return 0.0
    return float(gammainc(params.n_max + 1, lam))


def coherent(z: np.ndarray, params: FockParams, *, tail_threshold: float = 1e-8) -> FockVector:
    """Truncated coherent state W(-i sqrt(2)/eps z) Omega in closed form.

    Coefficient at occupation m is
        e^{-|z|^2/(2 eps)} prod_j (z_j/sqrt(eps))^{m_j} / sqrt(m_j!).
    Raises TruncationError naming the required cutoff when the Poisson
    tail exceeds tail_threshold.
    """
    z = np.asarray(z, dtype=complex)
    tail = coherent_tail(z, params)
    if tail > tail_threshold:
        lam = float(np.vdot(z, z).real) / params.epsilon
        need = params.n_max
        while gammainc(need + 1, lam) > tail_threshold:
            need += 1
        raise TruncationError(
            f"coherent tail {tail:.2e} exceeds {tail_threshold:.1e}; need n_max >= {need}",
            required_n_max=need,
        )
    basis = params.basis()
    lam = float(np.vdot(z, z).real) / params.epsilon
    scaled = z / math.sqrt(params.epsilon)
    mags = np.abs(scaled)
    args = np.angle(scaled)
    zero_modes = mags == 0
    # occupied zero-amplitude modes kill the coefficient; exclude them
    # from the log sum to avoid 0 * (-inf)
    dead = (basis[:, zero_modes] > 0).any(axis=1) if zero_modes.any() else np.zeros(
        basis.shape[0], dtype=bool)
    safe_log = np.where(zero_modes, 0.0, np.log(np.where(zero_modes, 1.0, mags)))
    log_coeff = basis @ safe_log - 0.5 * gammaln(basis + 1).sum(axis=1) - lam / 2
    phase = basis @ args
    coeffs = np.exp(log_coeff) * np.exp(1j * phase)
    coeffs[dead] = 0.0
    return FockVector(coeffs.astype(complex), params)


def n_max_for_tail(amplitude: float, epsilon: float, threshold: float) -> int:
    """Smallest cutoff whose Poisson tail at |z| = amplitude is below threshold."""
    lam = amplitude**2 / epsilon
    n = max(1, int(lam))
    while gammainc(n + 1, lam) > threshold:
        n += max(1, int(0.05 * lam))
    while n > 1 and gammainc(n, lam) <= threshold:
        n -= 1
    return n


def save_fock_vector(path, vec: FockVector) -> None:
    """Binary checkpoint: uint64 dim, then interleaved re/im doubles, little-endian."""
    coeffs = np.ascontiguousarray(vec.coeffs, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", coeffs.size))
        fh.write(coeffs.tobytes())


def load_fock_vector(path, params: FockParams) -> FockVector:
    with open(path, "rb") as fh:
        (dim,) = struct.unpack("<Q", fh.read(8))
        if dim != params.dim:
            raise ValueError(f"checkpoint dim {dim} does not match params dim {params.dim}")
        coeffs = np.frombuffer(fh.read(16 * dim), dtype="<c16").astype(complex)
    return FockVector(coeffs, params)
