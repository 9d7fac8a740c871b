"""Symbol algebra and Wick quantization.

A symbol is a finite family of symmetric tensors V = (V^(0), ..,
V^(n_top)) stored in normalized occupation coordinates: degree n holds
one complex coefficient per occupation multi-index with |m| = n, listed
in the same ascending-lex order the Fock basis uses within a sector.
The associated phase-space function is

    F_V(z) = sum_n sum_{|m|=n} V^(n)_m prod_j w_j^{m_j} / sqrt(m_j!),
    w = z + conj(z),

and the quantization F_V^Wick normal-orders w_j = z_j + zbar_j into
ladder operators.  Translation by phi acts on coordinates through the
unit-scaled annihilation of u = phi + conj(phi):

    (V_phi)^(p) = sum_{n >= p} a(u)^{n-p} V^(n) / (n-p)! ,

which is the coordinate form of the partial contractions
S_p <u^{(n-p)}| x 1^(p) V^(n) with their sqrt(n!/p!)/(n-p)! weights.
Gradient, quadratic part and remainder are the degree-1, degree-2 and
degree>=3 slices of that expansion.

Two quantization routes coexist on purpose.  wick_matrix assembles the
normal-ordered multinomial formula over sparse ladders (production);
wick_matrix_reference builds, per (p,q) monomial, the symmetrization
projector construction on full tensor factors (small instances only)
and is the oracle the production formula is validated against.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConsistencyError, DomainViolationError
from .fock import (
    FockParams,
    SparseOperator,
    gamma_scalar,
    occupations_of_degree,
    rank_map,
    sector_of_index,
)

REAL_FLAG_TOL = 1e-14


# ---------------------------------------------------------------------------
# symbol container

@dataclass(frozen=True)
class Symbol:
    """Finite-degree symbol in occupation coordinates."""

    d: int
    tensors: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for n, arr in self.tensors.items():
            arr = np.asarray(arr, dtype=complex)
            expected = occupations_of_degree(self.d, n).shape[0]
            if arr.shape != (expected,):
                raise ValueError(f"degree {n}: expected {expected} coefficients, got {arr.shape}")
            clean[int(n)] = arr
        object.__setattr__(self, "tensors", clean)

    @property
    def n_top(self) -> int:
        live = [n for n, arr in self.tensors.items() if np.any(arr)]
        return max(live) if live else 0

    @property
    def is_real(self) -> bool:
        return all(np.max(np.abs(arr.imag), initial=0.0) < REAL_FLAG_TOL
                   for arr in self.tensors.values())

    def degree(self, n: int) -> np.ndarray:
        if n in self.tensors:
            return self.tensors[n]
        return np.zeros(occupations_of_degree(self.d, n).shape[0], dtype=complex)

    def norm(self) -> float:
        return math.sqrt(sum(float(np.sum(np.abs(a) ** 2)) for a in self.tensors.values()))

    def sector_norms(self) -> dict:
        return {n: float(np.linalg.norm(a)) for n, a in sorted(self.tensors.items())}

    def conj(self) -> "Symbol":
        return Symbol(self.d, {n: np.conj(a) for n, a in self.tensors.items()}, dict(self.meta))

    def scaled(self, c: complex) -> "Symbol":
        return Symbol(self.d, {n: c * a for n, a in self.tensors.items()}, dict(self.meta))

    def __add__(self, other: "Symbol") -> "Symbol":
        if other.d != self.d:
            raise ValueError("mode count mismatch")
        degrees = set(self.tensors) | set(other.tensors)
        return Symbol(self.d, {n: self.degree(n) + other.degree(n) for n in degrees})


def symbol_from_entries(d: int, entries) -> Symbol:
    """entries: iterable of (m tuple, coefficient)."""
    by_degree = {}
    for m, c in entries:
        m = tuple(int(x) for x in m)
        if len(m) != d:
            raise ValueError(f"index {m} has wrong length for d={d}")
        n = sum(m)
        arr = by_degree.setdefault(n, {})
        arr[m] = arr.get(m, 0) + complex(c)
    tensors = {}
    for n, coeffs in by_degree.items():
        occ = occupations_of_degree(d, n)
        lookup = {tuple(row): i for i, row in enumerate(occ)}
        arr = np.zeros(occ.shape[0], dtype=complex)
        for m, c in coeffs.items():
            arr[lookup[m]] = c
        tensors[n] = arr
    return Symbol(d, tensors)


def symbol_to_json_dict(V: Symbol) -> dict:
    tensors = []
    for n in sorted(V.tensors):
        occ = occupations_of_degree(V.d, n)
        entries = [
            {"m": [int(x) for x in occ[i]], "re": float(c.real), "im": float(c.imag)}
            for i, c in enumerate(V.tensors[n])
            if c != 0
        ]
        tensors.append({"n": int(n), "entries": entries})
    return {"d": int(V.d), "tensors": tensors, "meta": V.meta}


def symbol_from_json_dict(data: dict) -> Symbol:
    d = int(data["d"])
    entries = []
    for block in data.get("tensors", []):
        for e in block["entries"]:
            entries.append((tuple(e["m"]), complex(e["re"], e.get("im", 0.0))))
    sym = symbol_from_entries(d, entries) if entries else Symbol(d, {})
    return Symbol(d, sym.tensors, dict(data.get("meta", {})))


def save_symbol(path, V: Symbol) -> None:
    with open(path, "w") as fh:
        json.dump(symbol_to_json_dict(V), fh, indent=1)


def load_symbol(path) -> Symbol:
    with open(path) as fh:
        return symbol_from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# coordinate kernels

@functools.lru_cache(maxsize=None)
def _inv_sqrt_factorials(d: int, n: int) -> np.ndarray:
    from scipy.special import gammaln

    occ = occupations_of_degree(d, n)
    return np.exp(-0.5 * gammaln(occ + 1).sum(axis=1))


@functools.lru_cache(maxsize=None)
def _lowering_maps(d: int, n: int):
    """Index and factor arrays realizing a(u) from degree n to n-1 (unit scale)."""
    lower = occupations_of_degree(d, n - 1)
    ranks = {tuple(row): i for i, row in enumerate(occupations_of_degree(d, n))}
    idx = np.empty((d, lower.shape[0]), dtype=np.int64)
    fac = np.empty((d, lower.shape[0]))
    for j in range(d):
        for i, mu in enumerate(lower):
            target = mu.copy()
            target[j] += 1
            idx[j, i] = ranks[tuple(target)]
            fac[j, i] = math.sqrt(mu[j] + 1)
    return idx, fac


def _annihilate_real(arr: np.ndarray, u: np.ndarray, d: int, n: int) -> np.ndarray:
    """Unit-scaled a(u) applied to a degree-n coefficient array, u real."""
    idx, fac = _lowering_maps(d, n)
    out = np.zeros(occupations_of_degree(d, n - 1).shape[0], dtype=complex)
    for j in range(d):
        if u[j] != 0:
            out += u[j] * fac[j] * arr[idx[j]]
    return out


def _real_direction(phi: np.ndarray) -> np.ndarray:
    return 2.0 * np.real(np.asarray(phi, dtype=complex))


def eval_symbol(V: Symbol, z: np.ndarray) -> complex:
    """F_V(z); real for real symbols since w = z + conj(z) is real."""
    return sum(eval_symbol_by_degree(V, z).values())


def eval_symbol_by_degree(V: Symbol, z: np.ndarray) -> dict:
    w = _real_direction(z)
    out = {}
    for n, arr in V.tensors.items():
        occ = occupations_of_degree(V.d, n)
        monomials = np.prod(w[None, :] ** occ, axis=1)
        out[n] = complex(np.sum(arr * monomials * _inv_sqrt_factorials(V.d, n)))
    return out


def translate_symbol(V: Symbol, phi: np.ndarray) -> Symbol:
    """Coefficients of z -> F_V(z + phi); exact finite sum, n_top preserved."""
    u = _real_direction(phi)
    out = {n: arr.copy() for n, arr in V.tensors.items()}
    for n, arr in V.tensors.items():
        work = arr
        kfact = 1.0
        for k in range(1, n + 1):
            work = _annihilate_real(work, u, V.d, n - k + 1)
            kfact *= k
            p = n - k
            contrib = work / kfact
            if p in out:
                out[p] = out[p] + contrib
            else:
                out[p] = contrib
    return Symbol(V.d, out)


def grad_zbar(V: Symbol, phi: np.ndarray) -> np.ndarray:
    """d/d zbar of F_V at phi: sum_k k/sqrt(k!) <(phi+conj phi)^(k-1)| x 1 V^(k)."""
    u = _real_direction(phi)
    acc = np.zeros(V.d, dtype=complex)
    delta_rank = _delta_ranks(V.d)
    for n, arr in V.tensors.items():
        if n < 1:
            continue
        work = arr
        for k in range(n - 1):
            work = _annihilate_real(work, u, V.d, n - k)
        work = work / math.factorial(n - 1)
        acc += work[delta_rank]
    return acc


@functools.lru_cache(maxsize=None)
def _delta_ranks(d: int) -> np.ndarray:
    occ = occupations_of_degree(d, 1)
    lookup = {tuple(row): i for i, row in enumerate(occ)}
    return np.array([lookup[tuple(np.eye(d, dtype=np.int64)[j])] for j in range(d)])


def quadratic_part(V: Symbol, phi: np.ndarray) -> np.ndarray:
    """Degree-2 coefficient array of the translated symbol.

    Normalized so that (1/sqrt(2)) <(z+zbar)^(2), V2> is exactly the
    second-order term of F_V(z + phi); a pure degree-2 symbol returns
    its own V^(2) unchanged.
    """
    u = _real_direction(phi)
    dim2 = occupations_of_degree(V.d, 2).shape[0]
    acc = np.zeros(dim2, dtype=complex)
    for n, arr in V.tensors.items():
        if n < 2:
            continue
        work = arr
        for k in range(n - 2):
            work = _annihilate_real(work, u, V.d, n - k)
        acc += work / math.factorial(n - 2)
    return acc


def two_tensor_matrix(arr2: np.ndarray, d: int) -> np.ndarray:
    """Symmetric d x d matrix form of a degree-2 occupation array."""
    occ = occupations_of_degree(d, 2)
    M = np.zeros((d, d), dtype=complex)
    for c, mu in zip(arr2, occ):
        js = np.flatnonzero(mu)
        if len(js) == 1:
            M[js[0], js[0]] = c
        else:
            M[js[0], js[1]] = c / math.sqrt(2)
            M[js[1], js[0]] = c / math.sqrt(2)
    return M


def remainder_symbol(V: Symbol, phi: np.ndarray) -> Symbol:
    """Translated symbol with degrees 0,1,2 zeroed: the semiclassical remainder."""
    shifted = translate_symbol(V, phi)
    tensors = {n: arr for n, arr in shifted.tensors.items() if n >= 3}
    return Symbol(V.d, tensors)


def omega_integrand(V: Symbol, phi: np.ndarray) -> float:
    """Phase rate: sum_k (k-2)/2 <(phi+conj phi)^(k)/sqrt(k!), V^(k)>.

    Cross-checked against Re<phi, dF/dzbar(phi)> - F_V(phi); a mismatch
    signals a quantization-convention bug, not a numerical issue.
    """
    if not V.is_real:
        raise ValueError("omega integrand requires a real symbol")
    by_degree = eval_symbol_by_degree(V, phi)
    a = sum(0.5 * (k - 2) * val.real for k, val in by_degree.items())
    b = float(np.real(np.vdot(phi, grad_zbar(V, phi)))) - sum(v.real for v in by_degree.values())
    if abs(a - b) > 1e-10 * max(1.0, abs(a)):
        raise ConsistencyError(f"omega closed forms disagree: {a!r} vs {b!r}")
    return a


# ---------------------------------------------------------------------------
# quantization, production route

def wick_matrix(V: Symbol, params: FockParams) -> SparseOperator:
    """Normal-ordered assembly of F_V^Wick over eps-scaled ladders.

    For each coefficient V^(n)_m the multinomial split of
    prod_j (a*_j + a_j)^{m_j} contributes

        (V^(n)_m / sqrt(m!)) sum_{beta <= m} prod_j C(m_j, beta_j)
            prod_j a*_j^{m_j - beta_j}  prod_j a_j^{beta_j}.

    Validated entrywise against wick_matrix_reference (small instances).
    """
    if V.d != params.d:
        raise ValueError("symbol and params mode counts differ")
    basis = params.basis()
    ranks = rank_map(params.d, params.n_max)
    grades = sector_of_index(params.d, params.n_max)
    eps = params.epsilon
    dim = params.dim
    rows, cols, vals = [], [], []
    for n, arr in sorted(V.tensors.items()):
        occ = occupations_of_degree(V.d, n)
        inv_sqrt = _inv_sqrt_factorials(V.d, n)
        for i_m in np.flatnonzero(np.abs(arr)):
            m = occ[i_m]
            pref = arr[i_m] * inv_sqrt[i_m] * eps ** (n / 2)
            for beta in itertools.product(*(range(mj + 1) for mj in m)):
                beta = np.array(beta, dtype=np.int64)
                alpha = m - beta
                comb = 1.0
                for mj, bj in zip(m, beta):
                    comb *= math.comb(int(mj), int(bj))
                nb, na = int(beta.sum()), int(alpha.sum())
                ok = np.all(basis >= beta, axis=1) & (grades - nb + na <= params.n_max)
                src = np.flatnonzero(ok)
                if src.size == 0:
                    continue
                mu = basis[src]
                nu = mu - beta + alpha
                amp2 = np.ones(src.size)
                for j in range(params.d):
                    for step in range(int(beta[j])):
                        amp2 = amp2 * (mu[:, j] - step)
                    for step in range(int(alpha[j])):
                        amp2 = amp2 * (mu[:, j] - beta[j] + 1 + step)
                tgt = np.array([ranks[tuple(row)] for row in nu], dtype=np.int64)
                rows.append(tgt)
                cols.append(src)
                vals.append(pref * comb * np.sqrt(amp2))
    if not rows:
        return SparseOperator(sp.csr_matrix((dim, dim), dtype=complex), hermitian=True)
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
        dtype=complex,
    )
    return SparseOperator(mat, hermitian=V.is_real)


# ---------------------------------------------------------------------------
# quantization, reference route (symmetrization projectors on full tensors)

def symbol_monomials(V: Symbol):
    """(p, q, btilde) decomposition of F_V into homogeneous monomials.

    btilde is the matrix of the hermitian form between the symmetric
    subspaces, indexed by occupation bases of degrees q (rows) and p
    (columns), so that the degree-n part of F_V(z) equals
    sum_{p+q=n} <z^(q), btilde z^(p)>.
    """
    out = []
    for n, arr in sorted(V.tensors.items()):
        occ = occupations_of_degree(V.d, n)
        for q in range(n + 1):
            p = n - q
            occ_q = occupations_of_degree(V.d, q)
            occ_p = occupations_of_degree(V.d, p)
            rq = {tuple(r): i for i, r in enumerate(occ_q)}
            rp = {tuple(r): i for i, r in enumerate(occ_p)}
            bt = np.zeros((occ_q.shape[0], occ_p.shape[0]), dtype=complex)
            for i_m in np.flatnonzero(np.abs(arr)):
                m = occ[i_m]
                c = arr[i_m] / math.sqrt(math.prod(math.factorial(int(x)) for x in m))
                for beta in _splits_of(m, p):
                    alpha = m - beta
                    comb = math.prod(math.comb(int(mj), int(bj)) for mj, bj in zip(m, beta))
                    weight = math.sqrt(
                        math.prod(math.factorial(int(x)) for x in alpha)
                        * math.prod(math.factorial(int(x)) for x in beta)
                        / (math.factorial(q) * math.factorial(p))
                    )
                    bt[rq[tuple(alpha)], rp[tuple(beta)]] += c * comb * weight
            if np.any(bt):
                out.append((p, q, bt))
    return out


def _splits_of(m: np.ndarray, p: int):
    for beta in itertools.product(*(range(int(mj) + 1) for mj in m)):
        if sum(beta) == p:
            yield np.array(beta, dtype=np.int64)


@functools.lru_cache(maxsize=None)
def _symmetrizer(d: int, n: int) -> np.ndarray:
    """Projector S_n on the full n-fold tensor power of C^d."""
    dim = d**n
    S = np.zeros((dim, dim))
    axes = list(range(n))
    for perm in itertools.permutations(axes):
        P = np.zeros((dim, dim))
        for idx in itertools.product(range(d), repeat=n):
            src = _flat(idx, d)
            dst = _flat(tuple(idx[perm[k]] for k in range(n)), d)
            P[dst, src] = 1.0
        S += P
    return S / math.factorial(n)


def _flat(idx, d: int) -> int:
    out = 0
    for x in idx:
        out = out * d + x
    return out


@functools.lru_cache(maxsize=None)
def _occupation_embedding(d: int, n: int) -> np.ndarray:
    """Isometry from occupation coordinates into the full tensor power."""
    occ = occupations_of_degree(d, n)
    E = np.zeros((d**n, occ.shape[0]))
    for col, mu in enumerate(occ):
        letters = tuple(itertools.chain.from_iterable([j] * int(mu[j]) for j in range(d)))
        coeff = math.sqrt(
            math.prod(math.factorial(int(x)) for x in mu) / math.factorial(n)
        )
        seen = set()
        for perm in itertools.permutations(letters):
            if perm in seen:
                continue
            seen.add(perm)
            E[_flat(perm, d), col] = coeff
    return E


def monomial_wick_reference(btilde: np.ndarray, p: int, q: int, params: FockParams) -> np.ndarray:
    """Direct sector-by-sector quantization of a (p,q) monomial.

    On the n-particle sector the operator is
        sqrt(n! (n+q-p)!) / (n-p)!  eps^{(p+q)/2}
            S_{n-p+q} (btilde x 1^{(n-p)})
    realized literally with dense symmetrizers; small instances only.
    """
    d, n_max = params.d, params.n_max
    dim = params.dim
    out = np.zeros((dim, dim), dtype=complex)
    slices = {}
    start = 0
    for n in range(n_max + 1):
        size = occupations_of_degree(d, n).shape[0]
        slices[n] = slice(start, start + size)
        start += size
    for n in range(p, n_max + 1):
        n2 = n - p + q
        if n2 > n_max:
            continue
        k = n - p
        Ein = _occupation_embedding(d, n)
        Eout = _occupation_embedding(d, n2)
        bt_full = _occupation_embedding(d, q) @ btilde @ _occupation_embedding(d, p).T
        big = np.kron(bt_full, np.eye(d**k)) if k else bt_full
        block = Eout.T @ (_symmetrizer(d, n2) @ big) @ Ein
        pref = (
            math.sqrt(math.factorial(n) * math.factorial(n2))
            / math.factorial(k)
            * params.epsilon ** ((p + q) / 2)
        )
        out[slices[n2], slices[n]] += pref * block
    return out


def wick_matrix_reference(V: Symbol, params: FockParams) -> np.ndarray:
    """Oracle for wick_matrix: sum of monomial quantizations, dense."""
    out = np.zeros((params.dim, params.dim), dtype=complex)
    for p, q, bt in symbol_monomials(V):
        out += monomial_wick_reference(bt, p, q, params)
    return out


# ---------------------------------------------------------------------------
# inequality checks

def _bracket_weights(params: FockParams, power: float) -> np.ndarray:
    """(1 + N^2)^(power/2) eigenvalues over the graded basis, N eps-scaled."""
    grades = sector_of_index(params.d, params.n_max)
    return (1.0 + (params.epsilon * grades) ** 2) ** (power / 2)


def check_number_estimate(btilde: np.ndarray, p: int, q: int,
                          psi: np.ndarray, phi: np.ndarray, params: FockParams) -> float:
    """Margin of |<Psi, b^Wick Phi>| <= ||btilde|| ||<N>^{q/2} Psi|| ||<N>^{p/2} Phi||."""
    op = monomial_wick_reference(btilde, p, q, params)
    lhs = abs(np.vdot(psi, op @ phi))
    bnorm = float(np.linalg.svd(np.atleast_2d(btilde), compute_uv=False)[0])
    rhs = (
        bnorm
        * float(np.linalg.norm(_bracket_weights(params, q / 2) * psi))
        * float(np.linalg.norm(_bracket_weights(params, p / 2) * phi))
    )
    return rhs - lhs


def check_estana_bound(V: Symbol, psi: np.ndarray, params: FockParams) -> float:
    """Margin of ||F_V^Wick Psi|| <= ||V|| ||Gamma(sqrt(3)) Psi||, eps <= 1/3."""
    if params.epsilon > 1 / 3 + 1e-15:
        raise ValueError(f"estana bound requires eps <= 1/3, got {params.epsilon}")
    op = wick_matrix(V, params)
    lhs = float(np.linalg.norm(op.mat @ psi))
    g = gamma_scalar(math.sqrt(3.0), params)
    rhs = V.norm() * float(np.linalg.norm(g.mat @ psi))
    return rhs - lhs


def estana2_ratio(V: Symbol, psi: np.ndarray, params: FockParams,
                  weights: "GrowthWeights") -> float:
    """Diagnostic ratio for the entire-function bound; no pass/fail constant known.

    Uses S(x) = sum_k e^{-alpha0 lam^k} x^k and reports
    ||F_V^Wick Psi|| / (2 ||Gamma(sqrt eps) V|| ||Psi|| + B ||sqrt(S(N/eps)) Psi||)
    with B the series factor built from (lam1 eps)^n / a_{n+2}.
    """
    lam1 = 8 * math.e * 1.05
    op = wick_matrix(V, params)
    lhs = float(np.linalg.norm(op.mat @ psi))
    scale = math.sqrt(sum(
        params.epsilon**n * float(np.sum(np.abs(arr) ** 2))
        for n, arr in V.tensors.items()
    ))
    series = 0.0
    for n, arr in V.tensors.items():
        a_n2 = math.exp(-weights.alpha0 * weights.lam**(n + 2))
        series += (lam1 * params.epsilon) ** n / a_n2 * float(np.sum(np.abs(arr) ** 2))
    grades = sector_of_index(params.d, params.n_max)
    s_vals = np.array([
        sum(math.exp(-weights.alpha0 * weights.lam**k) * float(g) ** k for k in range(60))
        for g in grades
    ])
    rhs = 2 * scale * float(np.linalg.norm(psi)) + math.sqrt(series) * float(
        np.linalg.norm(np.sqrt(s_vals) * psi)
    )
    return lhs / rhs if rhs > 0 else 0.0


# ---------------------------------------------------------------------------
# growth weights and weighted norms

@dataclass(frozen=True)
class GrowthWeights:
    """Domain parameters for the e^{alpha Gamma(lam)} weight family.

    alpha0 and lam0 are the auxiliary constants of the explicit error
    bound, constrained by 1 < lam0 < lam and 0 < alpha0 lam^2 < alpha.
    """

    alpha: float
    lam: float
    alpha0: float = None
    lam0: float = None

    def __post_init__(self):
        if self.alpha <= 0 or self.lam <= 1:
            raise ValueError("need alpha > 0 and lam > 1")
        if self.lam0 is None:
            object.__setattr__(self, "lam0", 0.5 * (1 + self.lam))
        if self.alpha0 is None:
            object.__setattr__(self, "alpha0", 0.5 * self.alpha / self.lam**2)
        if not 1 < self.lam0 < self.lam:
            raise ValueError("need 1 < lam0 < lam")
        if not 0 < self.alpha0 * self.lam**2 < self.alpha:
            raise ValueError("need 0 < alpha0 lam^2 < alpha")


def weighted_norm(V: Symbol, w: GrowthWeights) -> float:
    """sqrt(sum_n e^{2 alpha lam^n} ||V^(n)||^2); finite support, exact sum."""
    log_terms = []
    for n, arr in V.tensors.items():
        s = float(np.sum(np.abs(arr) ** 2))
        if s == 0:
            continue
        log_terms.append(2 * w.alpha * w.lam**n + math.log(s))
    if not log_terms:
        return 0.0
    peak = max(log_terms)
    if peak > 1400:
        raise DomainViolationError(f"weighted norm overflows (log term {peak:.1f})")
    return math.exp(0.5 * (peak + math.log(sum(math.exp(t - peak) for t in log_terms))))


SERIES_REL_CUTOFF = 1e-16
SERIES_MAX_TERMS = 20000


def growth_series(w: GrowthWeights, v2_time_integral: float, r: float,
                  derivative: bool = False) -> float:
    """g_t(r) = sum_k e^{-alpha0 lam^k} e^{2 sqrt(2) lam0^k J} (r+1)^k, J >= 0.

    Terms are summed until one falls below 1e-16 of the running sum
    while decreasing; growth past the overflow guard raises a
    domain-violation report.
    """
    if r < 0 or v2_time_integral < 0:
        raise ValueError("need r >= 0 and a nonnegative time integral")
    total = 0.0
    prev = math.inf
    decreasing = False
    for k in range(SERIES_MAX_TERMS):
        log_t = -w.alpha0 * w.lam**k + 2 * math.sqrt(2) * w.lam0**k * v2_time_integral
        if r > 0:
            log_t += k * math.log1p(r)
        if log_t > 700:
            raise DomainViolationError(
                f"growth series term overflows at k={k} (log {log_t:.1f})"
            )
        term = math.exp(log_t) * (k if derivative else 1.0)
        total += term
        if term < prev:
            decreasing = True
        if decreasing and total > 0 and term < SERIES_REL_CUTOFF * total:
            return total
        prev = term
    raise DomainViolationError("growth series failed to converge")


def g_prime_zero(w: GrowthWeights, v2_time_integral: float) -> float:
    return growth_series(w, v2_time_integral, 0.0, derivative=True)


# ---------------------------------------------------------------------------
# model builders

def build_pphi2(alphas, m0: float, k_grid, k_weights, x_grid, x_weights, g_samples) -> Symbol:
    """Discretized even-polynomial field interaction.

    V^(j) = sqrt(j!) alpha_j sum_x dx g(x) v_x^(j) with
    (v_x)_k = w_k e^{-i k x} / sqrt(omega(k)), omega(k) = sqrt(m0^2+k^2).
    Realness requires a symmetric x grid with even nonnegative samples.
    """
    alphas = np.asarray(alphas, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    k_weights = np.asarray(k_weights, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    x_weights = np.asarray(x_weights, dtype=float)
    g_samples = np.asarray(g_samples, dtype=float)
    if m0 <= 0:
        raise ValueError("need m0 > 0")
    if len(alphas) % 2 == 0 or alphas[-1] <= 0:
        raise ValueError("polynomial must have even top degree with positive coefficient")
    if np.any(g_samples < 0):
        raise ValueError("cutoff samples must be nonnegative")
    order = np.argsort(x_grid)
    xs, ws, gs = x_grid[order], x_weights[order], g_samples[order]
    xneg = np.sort(-x_grid)
    if not (np.allclose(xs, xneg, atol=1e-12)
            and np.allclose(ws, ws[::-1], atol=1e-12)
            and np.allclose(gs, gs[::-1], atol=1e-12)):
        raise ValueError("asymmetric spatial grid breaks realness of the symbol")
    d = len(k_grid)
    omega = np.sqrt(m0**2 + k_grid**2)
    tensors = {}
    for j, aj in enumerate(alphas):
        if aj == 0:
            continue
        occ = occupations_of_degree(d, j)
        arr = np.zeros(occ.shape[0], dtype=complex)
        for x, wx, gx in zip(x_grid, x_weights, g_samples):
            if gx == 0 or wx == 0:
                continue
            v = k_weights * np.exp(-1j * k_grid * x) / np.sqrt(omega)
            arr += wx * gx * np.prod(v[None, :] ** occ, axis=1)
        fac = np.array([
            math.factorial(j) / math.sqrt(math.prod(math.factorial(int(x)) for x in mu))
            for mu in occ
        ])
        tensors[j] = aj * fac * arr
    sym = Symbol(d, tensors, {"builder": "pphi2", "m0": float(m0)})
    if not sym.is_real:
        worst = max(float(np.max(np.abs(a.imag))) for a in tensors.values())
        raise ValueError(f"assembled symbol has imaginary parts up to {worst:.2e}")
    return sym


def build_entire(a_even, phi: np.ndarray, w: GrowthWeights, n_cut: int) -> Symbol:
    """Entire-series interaction: tensors a_{2n} phi^(2n) for n <= n_cut.

    a_even[k] multiplies phi^(2k).  The weighted domain terms
    a_m^2 e^{2 alpha lam^m} |phi|^{2m} must be decreasing at the cut;
    the check report is attached to the symbol metadata.
    """
    a_even = np.asarray(a_even, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    d = phi.shape[0]
    amp = float(np.linalg.norm(phi))
    terms = []
    for k in range(min(len(a_even), n_cut + 1)):
        m = 2 * k
        if a_even[k] == 0 or (amp == 0 and m > 0):
            terms.append(-math.inf)
            continue
        log_t = 2 * math.log(abs(a_even[k])) + 2 * w.alpha * w.lam**m
        if m > 0:
            log_t += 2 * m * math.log(amp)
        terms.append(log_t)
    finite = [t for t in terms if t > -math.inf]
    if len(finite) >= 2 and finite[-1] >= finite[-2]:
        raise DomainViolationError(
            "weighted domain terms are not decreasing at the degree cut"
        )
    tensors = {}
    for k in range(min(len(a_even), n_cut + 1)):
        if a_even[k] == 0:
            continue
        n = 2 * k
        occ = occupations_of_degree(d, n)
        from scipy.special import gammaln

        coeff = np.prod(phi[None, :] ** occ, axis=1)
        weightv = np.exp(0.5 * (gammaln(n + 1) - gammaln(occ + 1).sum(axis=1)))
        tensors[n] = a_even[k] * weightv * coeff
    report = {
        "builder": "entire",
        "domain_log_terms": [None if t == -math.inf else float(t) for t in terms],
        "decreasing_at_cut": True,
    }
    return Symbol(d, tensors, report)
