"""Krylov (Lanczos) propagation for Hermitian sparse generators.

Computes e^{tau H} v for Hermitian H and complex tau without forming the
exponential.  The step is split into substeps sized from a cheap norm
estimate; each substep builds a short Lanczos recurrence and
exponentiates the tridiagonal projection.  Convergence is checked with
the standard a-posteriori estimate beta * |[e^{tau T}]_{m,1}| and a
substep is halved on failure.  Krylov breakdown is a happy breakdown:
the subspace is invariant and the projected result exact.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal


def _onenorm_estimate(H) -> float:
    return float(np.max(np.abs(H).sum(axis=1)))


def _small_expm(alphas, betas, tau):
    ev, Q = eigh_tridiagonal(np.array(alphas), np.array(betas))
    return Q @ (np.exp(tau * ev) * Q[0, :])


def _assemble(V, small, nrm):
    out = small[0] * V[0]
    for c, vk in zip(small[1:], V[1:]):
        out = out + c * vk
    return nrm * out


def _lanczos_step(H, v, tau, max_krylov, tol):
    """One substep; returns (result, converged)."""
    nrm = float(np.linalg.norm(v))
    if nrm == 0:
        return v.copy(), True
    V = [v / nrm]
    alphas: list[float] = []
    betas: list[float] = []
    w = H @ V[0]
    alphas.append(float(np.real(np.vdot(V[0], w))))
    w = w - alphas[0] * V[0]
    small = None
    for j in range(1, max_krylov + 1):
        beta = float(np.linalg.norm(w))
        if beta < 1e-14:
            small = _small_expm(alphas, betas, tau)
            return _assemble(V, small, nrm), True
        if j >= 2 and (j % 2 == 0 or j == max_krylov):
            small = _small_expm(alphas, betas, tau)
            if beta * abs(small[-1]) * min(1.0, abs(tau)) < tol:
                return _assemble(V, small, nrm), True
        V.append(w / beta)
        betas.append(beta)
        w = H @ V[-1] - beta * V[-2]
        alpha = float(np.real(np.vdot(V[-1], w)))
        w = w - alpha * V[-1]
        alphas.append(alpha)
    small = _small_expm(alphas, betas, tau)
    return _assemble(V[: small.size], small, nrm), False


def expm_multiply_hermitian(H, v, tau, *, tol: float = 1e-11, max_krylov: int = 40,
                            norm_estimate: float | None = None) -> np.ndarray:
    """e^{tau H} v for Hermitian H (csr or anything supporting @), complex tau."""
    v = np.asarray(v, dtype=complex)
    scale = abs(tau) * (norm_estimate if norm_estimate is not None else _onenorm_estimate(H))
    n_sub = max(1, int(np.ceil(scale / 12.0)))
    remaining = n_sub
    step = tau / n_sub
    out = v
    while remaining > 0:
        res, ok = _lanczos_step(H, out, step, max_krylov, tol / max(1, n_sub))
        if not ok:
            n_sub *= 2
            remaining *= 2
            step = step / 2
            if abs(step) < 1e-300:
                raise RuntimeError("Krylov propagation failed to converge")
            continue
        out = res
        remaining -= 1
    return out
