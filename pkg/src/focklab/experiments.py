"""Experiment orchestration: scaling study, Hepp limit, persistence.

A run is described by a JSON config pointing at a model file (one
particle energy plus interaction symbol).  The classical trajectory and
the quadratic propagator are eps-independent and computed once; the
sweep then builds, per eps, the coherent initial state, the full
quantum evolution and the squeezed-coherent ansatz, and records the
norm error.  Graded-lex ordering makes every smaller truncation a
prefix of a larger one, which is what lets one U2 solve serve the whole
sweep.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classical import ClassicalTrajectory, evolve_classical, trajectory_to_csv
from .errors import ConfigError, DomainViolationError
from .fock import (
    FockParams,
    FockVector,
    coherent_tail,
    n_max_for_tail,
    rank_map,
    vacuum,
    weyl_apply,
)
from .hilbert import OneParticleSpace
from .quadratic import build_quadratic_generator, u2_family
from .quantum import QuantumSystem, displaced_state, evolve_quantum, hepp_expectation
from .wick import (
    GrowthWeights,
    Symbol,
    g_prime_zero,
    growth_series,
    symbol_from_json_dict,
)

TOP_SECTOR_FLAG = 1e-6
AMPLITUDE_SAFETY = 2.0
SCALING_HEADER = ["epsilon", "time", "error", "omega", "nmax", "dim", "tail", "norm_drift"]
HEPP_HEADER = ["epsilon", "time", "abs_error"]


# ---------------------------------------------------------------------------
# configuration and model files

@dataclass
class ExperimentConfig:
    model_path: str
    phi0: np.ndarray
    psi_entries: list | None          # None means vacuum
    T: float
    times: list
    epsilons: list
    n_max_policy: dict
    xi: np.ndarray | None = None
    steps: int = 2000
    u2_substeps: int = 2
    workers: int = 1
    seed: int = 0
    out_dir: str = "."
    growth: GrowthWeights = field(default_factory=lambda: GrowthWeights(0.1, 2.0))
    quantum_tol: float = 1e-10

    def __post_init__(self):
        eps = list(self.epsilons)
        if not eps or any(not 0 < e <= 1 for e in eps):
            raise ConfigError("epsilon values must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon list must be strictly decreasing")
        if self.n_max_policy.get("policy") == "tail":
            thr = self.n_max_policy.get("threshold", 1e-8)
            if thr > 1e-6:
                raise ConfigError("tail threshold must be <= 1e-6")
        elif self.n_max_policy.get("policy") != "explicit":
            raise ConfigError("n_max policy must be 'tail' or 'explicit'")
        if not self.times or max(self.times) > self.T + 1e-12:
            raise ConfigError("need output times within (0, T]")


def _parse_complex_vector(data) -> np.ndarray:
    return np.array([complex(re, im) for re, im in data], dtype=complex)


def load_model(path):
    """Model file: d, A as row-major [re, im] pairs, and the symbol block."""
    try:
        with open(path) as fh:
            data = json.load(fh)
        d = int(data["d"])
        flat = np.array([complex(re, im) for re, im in data["A"]], dtype=complex)
        if flat.size != d * d:
            raise ConfigError(f"A has {flat.size} entries, expected {d * d}")
        A = flat.reshape(d, d)
        if np.max(np.abs(A.imag)) > 0:
            raise ConfigError("A must be real in the conjugation-fixed basis")
        space = OneParticleSpace(A.real)
        symbol = symbol_from_json_dict(data["symbol"])
        if symbol.d != d:
            raise ConfigError("symbol mode count does not match d")
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad model file {path}: {exc}") from exc
    return space, symbol


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        model_path = os.path.join(base, data["model"])
        psi = data.get("psi", "vacuum")
        psi_entries = None
        if psi != "vacuum":
            psi_entries = [(tuple(e["m"]), complex(e["re"], e.get("im", 0.0)))
                           for e in psi["entries"]]
        growth = data.get("growth", {})
        cfg = ExperimentConfig(
            model_path=model_path,
            phi0=_parse_complex_vector(data["phi0"]),
            psi_entries=psi_entries,
            T=float(data["T"]),
            times=[float(t) for t in data["times"]],
            epsilons=[float(e) for e in data["epsilons"]],
            n_max_policy=data.get("n_max", {"policy": "tail", "threshold": 1e-8}),
            xi=_parse_complex_vector(data["xi"]) if "xi" in data else None,
            steps=int(data.get("steps", 2000)),
            u2_substeps=int(data.get("u2_substeps", 2)),
            workers=int(data.get("workers", 1)),
            seed=int(data.get("seed", 0)),
            out_dir=data.get("out_dir", "."),
            growth=GrowthWeights(growth.get("alpha", 0.1), growth.get("lam", 2.0)),
            quantum_tol=float(data.get("quantum_tol", 1e-10)),
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    return cfg


def psi_vector(entries, params: FockParams) -> np.ndarray:
    """Finite-particle initial vector from an occupation list, normalized."""
    if entries is None:
        return vacuum(params).coeffs
    ranks = rank_map(params.d, params.n_max)
    v = np.zeros(params.dim, dtype=complex)
    for m, c in entries:
        if len(m) != params.d or sum(m) > params.n_max:
            raise ConfigError(f"psi occupation {m} outside the truncation")
        v[ranks[tuple(int(x) for x in m)]] += c
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ConfigError("psi specification is the zero vector")
    return v / nrm


def resolve_n_max(cfg: ExperimentConfig, epsilon: float, amplitude: float) -> int:
    """Cutoff policy: explicit value, or Poisson tail at twice the peak amplitude."""
    pol = cfg.n_max_policy
    if pol["policy"] == "explicit":
        return int(pol["value"])
    thr = float(pol.get("threshold", 1e-8))
    return n_max_for_tail(AMPLITUDE_SAFETY * amplitude, epsilon, thr)


# ---------------------------------------------------------------------------
# scaling study

@dataclass
class ScalingResult:
    rows: list                  # dicts in CSV column order
    slopes: dict                # time -> (slope, rms_residual)
    bounds: dict                # (epsilon, time) -> float | None
    invalid: list               # epsilons excluded by truncation flags
    u2_solves: int


def _scaling_rows_for_eps(space, symbol, cfg, traj_data, u2_slices, epsilon, n_max):
    """Rows for one eps; traj_data carries (times, phi_t, omega_t)."""
    times, phis, omegas = traj_data
    params = FockParams(space.d, n_max, epsilon)
    sys = QuantumSystem(space, symbol, params)
    psi0 = psi_vector(cfg.psi_entries, params)
    state = displaced_state(sys, cfg.phi0, None if cfg.psi_entries is None else psi0,
                            tail_threshold=1.0)
    norm0 = float(np.linalg.norm(state))
    rows = []
    flagged = False
    prev_t = 0.0
    for t, phi_t, om_t in zip(times, phis, omegas):
        state = evolve_quantum(sys, state, t - prev_t, tol=cfg.quantum_tol)
        prev_t = t
        u2psi = u2_slices[t][: params.dim].copy()
        f_t = -1j * math.sqrt(2) / epsilon * phi_t
        ansatz = np.exp(1j * om_t / epsilon) * weyl_apply(f_t, u2psi, params)
        err = float(np.linalg.norm(state - ansatz))
        tail = coherent_tail(phi_t, params)
        drift = abs(float(np.linalg.norm(state)) - norm0)
        top = FockVector(state, params).top_sector_mass()
        if top > TOP_SECTOR_FLAG:
            flagged = True
        rows.append({
            "epsilon": epsilon, "time": t, "error": err, "omega": om_t,
            "nmax": n_max, "dim": params.dim, "tail": tail, "norm_drift": drift,
        })
    return rows, flagged


def _worker(args):
    return _scaling_rows_for_eps(*args)


def evaluate_paper_bound(symbol: Symbol, traj: ClassicalTrajectory, psi_sectors,
                         w: GrowthWeights, epsilon: float, t: float):
    """Explicit error-bound shape c(t, Psi) sqrt(eps) with unit front constant.

    Returns None when any exponential in the expression overflows,
    which is the generic situation as eps -> 0 for multi-degree symbols.
    """
    try:
        log_terms = []
        for n, arr in symbol.tensors.items():
            s2 = float(np.sum(np.abs(arr) ** 2))
            if s2 == 0:
                continue
            expo = (n / epsilon) * math.log(w.lam)
            if expo > 700:
                return None
            weight = 2 * w.alpha * w.lam ** (n / epsilon)
            if weight > 1400:
                return None
            log_terms.append(weight + math.log(s2))
        if not log_terms:
            return 0.0
        peak = max(log_terms)
        log_wnorm = 0.5 * (peak + math.log(sum(math.exp(x - peak) for x in log_terms)))
        if log_wnorm > 700:
            return None
        wnorm = math.exp(log_wnorm)
        k_end = traj.index_of(t)
        dt = traj.dt
        integrand = np.zeros(k_end + 1)
        j_cum = 0.0
        for k in range(k_end + 1):
            if k > 0:
                j_cum += 0.5 * (traj.v2_norms[k] + traj.v2_norms[k - 1]) * dt
            amp2 = float(np.vdot(traj.phi[k], traj.phi[k]).real)
            if 4 * amp2 > 700:
                return None
            gsum = sum(growth_series(w, j_cum, 0.0) * wgt if n == 0
                       else growth_series(w, j_cum, float(n)) * wgt
                       for n, wgt in psi_sectors)
            bracket = gsum + g_prime_zero(w, j_cum) * j_cum
            integrand[k] = math.exp(4 * amp2) * math.sqrt(bracket)
        c_t = float(np.trapezoid(integrand, dx=dt))
        return wnorm * c_t * math.sqrt(epsilon)
    except (DomainViolationError, OverflowError):
        return None


def _u2_growth_diagnostic(cfg, traj, params_global, psi_global, u2_slices) -> dict:
    """Number-weight growth of U2(t,0)Psi for k in {1,2,4}, with the
    exponential shape it is compared against; monitored, never pass/fail
    (the scheme's constants are not specified)."""
    from .fock import sector_of_index

    grades = sector_of_index(params_global.d, params_global.n_max).astype(float)
    out = {}
    for t, u2psi in u2_slices.items():
        j_int = traj.v2_integral(t)
        entry = {}
        for k in (1, 2, 4):
            weighted = float(np.linalg.norm((grades + 1.0) ** (k / 2) * u2psi))
            base = float(np.linalg.norm((grades + 1.0) ** (k / 2) * psi_global))
            shape = math.exp(math.sqrt(2) * k * cfg.growth.lam0**k * j_int) * base
            entry[f"k{k}"] = {"weighted_norm": weighted, "shape": shape}
        out[str(t)] = entry
    return out


def _psi_sectors(entries, d: int):
    """(sector, weight) pairs of the normalized finite-particle vector."""
    if entries is None:
        return [(0, 1.0)]
    tot = {}
    nrm = 0.0
    for m, c in entries:
        n = int(sum(m))
        tot[n] = tot.get(n, 0.0) + abs(c) ** 2
        nrm += abs(c) ** 2
    return [(n, wgt / nrm) for n, wgt in sorted(tot.items())]


def run_scaling(cfg: ExperimentConfig, out_dir=None) -> ScalingResult:
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.time()
    space, symbol = load_model(cfg.model_path)
    traj = evolve_classical(space, symbol, cfg.phi0, cfg.T, nsteps=cfg.steps)
    amp = traj.max_amplitude()
    n_max_by_eps = {e: resolve_n_max(cfg, e, amp) for e in cfg.epsilons}
    n_max_global = max(n_max_by_eps.values())

    gen = build_quadratic_generator(space, traj, n_max_global, cfg.u2_substeps)
    params_global = FockParams(space.d, n_max_global, 1.0)
    psi_global = psi_vector(cfg.psi_entries, params_global)
    u2_states = u2_family(gen, psi_global, cfg.times)
    u2_slices = dict(zip(cfg.times, u2_states))
    u2_growth = _u2_growth_diagnostic(cfg, traj, params_global, psi_global, u2_slices)

    traj_data = (
        cfg.times,
        [traj.phi[traj.index_of(t)] for t in cfg.times],
        [traj.omega[traj.index_of(t)] for t in cfg.times],
    )
    tasks = [(space, symbol, cfg, traj_data, u2_slices, e, n_max_by_eps[e])
             for e in cfg.epsilons]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_worker, tasks))
    else:
        results = [_worker(t) for t in tasks]

    rows, invalid = [], []
    for eps, (eps_rows, flagged) in zip(cfg.epsilons, results):
        rows.extend(eps_rows)
        if flagged:
            invalid.append(eps)

    slopes = {}
    for t in cfg.times:
        pts = [(r["epsilon"], r["error"]) for r in rows
               if r["time"] == t and r["epsilon"] not in invalid and r["error"] > 0]
        if len(pts) >= 2:
            le = np.log([p[0] for p in pts])
            lr = np.log([p[1] for p in pts])
            A = np.vstack([le, np.ones_like(le)]).T
            sol, *_ = np.linalg.lstsq(A, lr, rcond=None)
            resid = float(np.sqrt(np.mean((lr - A @ sol) ** 2)))
            slopes[t] = (float(sol[0]), resid)

    sectors = _psi_sectors(cfg.psi_entries, space.d)
    bounds = {}
    for e in cfg.epsilons:
        for t in cfg.times:
            bounds[(e, t)] = evaluate_paper_bound(symbol, traj, sectors, cfg.growth, e, t)

    result = ScalingResult(rows, slopes, bounds, invalid, gen.solve_count)
    _write_csv(os.path.join(out_dir, "scaling.csv"), SCALING_HEADER, rows)
    trajectory_to_csv(traj, os.path.join(out_dir, "classical.csv"))
    manifest = _base_manifest(cfg, t_start)
    manifest.update({
        "kind": "scaling",
        "n_max": {str(e): n for e, n in n_max_by_eps.items()},
        "u2_solves": gen.solve_count,
        "invalid_epsilons": invalid,
        "slopes": {str(t): {"slope": s, "rms_residual": r} for t, (s, r) in slopes.items()},
        "paper_bound": {
            f"{e}:{t}": (b if b is not None else "bound not evaluable")
            for (e, t), b in bounds.items()
        },
        "u2_growth": u2_growth,
        "richardson_error": traj.richardson_error,
    })
    with open(os.path.join(out_dir, "scaling_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)
    return result


# ---------------------------------------------------------------------------
# Hepp limit study

def run_hepp(cfg: ExperimentConfig, out_dir=None):
    if cfg.xi is None:
        raise ConfigError("hepp run requires an xi vector in the config")
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.time()
    space, symbol = load_model(cfg.model_path)
    traj = evolve_classical(space, symbol, cfg.phi0, cfg.T, nsteps=cfg.steps)
    amp = traj.max_amplitude()
    rows = []
    for eps in cfg.epsilons:
        n_max = resolve_n_max(cfg, eps, amp)
        params = FockParams(space.d, n_max, eps)
        sys = QuantumSystem(space, symbol, params)
        psi0 = None if cfg.psi_entries is None else psi_vector(cfg.psi_entries, params)
        for t in cfg.times:
            phi_t = traj.phi[traj.index_of(t)]
            val = hepp_expectation(sys, cfg.phi0, cfg.xi, t, psi0, tol=cfg.quantum_tol)
            target = np.exp(1j * math.sqrt(2) * np.real(np.vdot(cfg.xi, phi_t)))
            rows.append({"epsilon": eps, "time": t, "abs_error": abs(val - target)})
    _write_csv(os.path.join(out_dir, "hepp.csv"), HEPP_HEADER, rows)
    manifest = _base_manifest(cfg, t_start)
    manifest["kind"] = "hepp"
    with open(os.path.join(out_dir, "hepp_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)
    return rows


# ---------------------------------------------------------------------------
# shared output helpers

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for key in header:
                val = row[key]
                out.append(f"{val:.17g}" if isinstance(val, float) else str(val))
            writer.writerow(out)


def _base_manifest(cfg: ExperimentConfig, t_start: float) -> dict:
    return {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "elapsed_s": round(time.time() - t_start, 3),
        "config": {
            "model": cfg.model_path,
            "phi0": [[z.real, z.imag] for z in cfg.phi0],
            "psi": "vacuum" if cfg.psi_entries is None else "entries",
            "T": cfg.T,
            "times": cfg.times,
            "epsilons": cfg.epsilons,
            "n_max_policy": cfg.n_max_policy,
            "steps": cfg.steps,
            "u2_substeps": cfg.u2_substeps,
            "workers": cfg.workers,
            "seed": cfg.seed,
            "xi": None if cfg.xi is None else [[z.real, z.imag] for z in cfg.xi],
        },
    }
