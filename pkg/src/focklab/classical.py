"""Classical field flow and the accumulated phase.

The mild solution of i d/dt phi = A phi + dF/dzbar(phi) is integrated
in the interaction picture, phi_tilde = e^{itA} phi, where the stiff
free rotation drops out of the step-size constraint:

    i d/dt phi_tilde = e^{itA} dF/dzbar(e^{-itA} phi_tilde).

The phase omega accumulates the same fourth-order quadrature.  A Picard
iteration of the Duhamel integral form serves as the independent
short-horizon oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, HorizonError
from .hilbert import OneParticleSpace, inner
from .wick import Symbol, eval_symbol, grad_zbar, omega_integrand, quadratic_part

DEFAULT_STEPS = 2000


@dataclass
class ClassicalTrajectory:
    """Grid samples of the flow: Schroedinger and interaction pictures,
    accumulated phase, energy, and cached quadratic-part norms."""

    times: np.ndarray
    phi: np.ndarray          # (steps+1, d) Schroedinger picture
    phi_tilde: np.ndarray    # (steps+1, d) e^{itA} phi
    omega: np.ndarray
    energy: np.ndarray
    v2_arrays: np.ndarray    # (steps+1, dim2) quadratic part along the orbit
    v2_norms: np.ndarray
    richardson_error: float

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def max_amplitude(self) -> float:
        return float(np.max(np.linalg.norm(self.phi, axis=1)))

    def index_of(self, t: float) -> int:
        k = int(round((t - self.times[0]) / self.dt))
        if not 0 <= k < len(self.times) or abs(self.times[k] - t) > 1e-9 * max(1, abs(t)):
            raise ValueError(f"time {t} is not on the trajectory grid")
        return k

    def v2_integral(self, t: float) -> float:
        """Trapezoid integral of ||V2(s)|| over [0, t]."""
        k = self.index_of(t)
        if k == 0:
            return 0.0
        return float(np.trapezoid(self.v2_norms[: k + 1], dx=self.dt))


def energy(space: OneParticleSpace, V: Symbol, phi: np.ndarray) -> float:
    """Classical energy h(phi) = <phi, A phi> + F_V(phi)."""
    if not V.is_real:
        raise ValueError("energy requires a real symbol")
    return float(inner(phi, space.A @ phi).real + eval_symbol(V, phi).real)


def _rk4(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(space, V, phi0, T, nsteps):
    d = space.d
    times = np.linspace(0.0, T, nsteps + 1)
    dt = T / nsteps
    tilde = np.zeros((nsteps + 1, d), dtype=complex)
    omega = np.zeros(nsteps + 1)
    tilde[0] = phi0

    def rhs(t, y):
        state = y[:d]
        phi = space.exp_A(t) @ state
        dphi = -1j * (space.exp_A(-t) @ grad_zbar(V, phi))
        return np.concatenate([dphi, [omega_integrand(V, phi)]])

    y = np.concatenate([np.asarray(phi0, dtype=complex), [0.0]])
    for k in range(nsteps):
        prev_norm = float(np.linalg.norm(y[:d]))
        y = _rk4(rhs, times[k], y, dt)
        if not np.all(np.isfinite(y.view(float))):
            raise BlowUpError(f"non-finite state at t={times[k + 1]:.6g}")
        if float(np.linalg.norm(y[:d])) > 2.0 * max(prev_norm, 1e-12):
            raise BlowUpError(f"field norm doubled within one step at t={times[k + 1]:.6g}")
        tilde[k + 1] = y[:d]
        omega[k + 1] = y[d].real
    return times, tilde, omega


def evolve_classical(space: OneParticleSpace, V: Symbol, phi0, T: float,
                     dt: float | None = None, *, nsteps: int | None = None,
                     richardson: bool = True) -> ClassicalTrajectory:
    """Fourth-order integration of the twisted field equation on [0, T].

    dt defaults to T/2000.  One Richardson halving estimates the
    endpoint error; no adaptive control, so runs are deterministic and
    directly comparable across a sweep.
    """
    if not V.is_real:
        raise ValueError("field equation requires a real symbol")
    phi0 = np.asarray(phi0, dtype=complex)
    if nsteps is None:
        nsteps = DEFAULT_STEPS if dt is None else max(1, int(round(T / dt)))
    times, tilde, omega = _integrate(space, V, phi0, T, nsteps)
    rich = 0.0
    if richardson:
        _, tilde2, _ = _integrate(space, V, phi0, T, 2 * nsteps)
        rich = float(np.linalg.norm(tilde2[-1] - tilde[-1]))
    rot = np.stack([space.exp_A(t) for t in times])
    phi = np.einsum("kij,kj->ki", rot, tilde)
    en = np.array([energy(space, V, p) for p in phi])
    v2 = np.stack([quadratic_part(V, p) for p in phi])
    v2n = np.linalg.norm(v2, axis=1)
    return ClassicalTrajectory(times, phi, tilde, omega, en, v2, v2n, rich)


def picard_oracle(space: OneParticleSpace, V: Symbol, phi0, T: float,
                  n_iter: int = 12, quad_points: int = 200, *,
                  return_distances: bool = False):
    """Fixed-point iteration of the Duhamel form on a Simpson grid.

    Independent of the differential integrator; valid only on horizons
    where the iteration contracts (monitored, error otherwise).
    """
    phi0 = np.asarray(phi0, dtype=complex)
    d = space.d
    h = T / quad_points
    times = np.linspace(0.0, T, quad_points + 1)
    free = np.stack([space.exp_A(t) @ phi0 for t in times])
    # e^{-i(t_k - t_s)A} depends only on k - s on the uniform grid
    rot = np.stack([space.exp_A(k * h) for k in range(quad_points + 1)])
    cur = free.copy()
    distances = []
    for _ in range(n_iter):
        grads = np.stack([grad_zbar(V, cur[k]) for k in range(quad_points + 1)])
        nxt = free.copy()
        for k in range(1, quad_points + 1):
            acc = np.zeros(d, dtype=complex)
            for s in range(k + 1):
                w = h if 0 < s < k else h / 2
                acc += w * (rot[k - s] @ grads[s])
            nxt[k] = free[k] - 1j * acc
        if not np.all(np.isfinite(nxt.view(float))):
            raise HorizonError("Picard iterates diverged; shorten T")
        dist = float(np.max(np.linalg.norm(nxt - cur, axis=1)))
        distances.append(dist)
        cur = nxt
        if dist == 0.0:
            break
    for a, b in zip(distances, distances[1:]):
        if a > 1e-14 and b > a:
            raise HorizonError(
                f"Picard iteration stopped contracting ({a:.2e} -> {b:.2e}); shorten T"
            )
    if return_distances:
        return cur[-1], distances
    return cur[-1]


def lipschitz_growth(r: float, n_terms: int = 80) -> float:
    """g(r) = sqrt(1 + sum_{n>=2} 4^{n-2} n(n-1)/(n-2)! r^{2(n-2)}).

    The increasing function from the local-existence contraction bound;
    used only as a runtime monitor on |phi_t|.
    """
    total = 1.0
    for n in range(2, n_terms):
        total += 4.0 ** (n - 2) * n * (n - 1) / math.factorial(n - 2) * r ** (2 * (n - 2))
    return math.sqrt(total)


def norm_bound_margin(traj: ClassicalTrajectory, V: Symbol) -> float:
    """Min over the grid of |phi0| + int 2||V|| g(|phi_s|) ds - |phi_t|."""
    norms = np.linalg.norm(traj.phi, axis=1)
    rates = 2.0 * V.norm() * np.array([lipschitz_growth(r) for r in norms])
    bound = norms[0] + np.concatenate([[0.0], np.cumsum(
        0.5 * (rates[1:] + rates[:-1]) * np.diff(traj.times))])
    return float(np.min(bound - norms))


def trajectory_to_csv(traj: ClassicalTrajectory, path) -> None:
    """CSV header: t,re_phi_1,im_phi_1,...,omega,energy."""
    d = traj.phi.shape[1]
    header = ["t"]
    for j in range(1, d + 1):
        header += [f"re_phi_{j}", f"im_phi_{j}"]
    header += ["omega", "energy"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(traj.times):
            row = [f"{t:.17g}"]
            for j in range(d):
                row += [f"{traj.phi[k, j].real:.17g}", f"{traj.phi[k, j].imag:.17g}"]
            row += [f"{traj.omega[k]:.17g}", f"{traj.energy[k]:.17g}"]
            writer.writerow(row)
