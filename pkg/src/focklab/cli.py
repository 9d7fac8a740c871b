"""Command line entry points.

Exit codes: 0 success, 1 invariant failure, 2 truncation invalidation,
3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, FocklabError
from .experiments import load_config, load_model, run_hepp, run_scaling
from .classical import evolve_classical, trajectory_to_csv
from .fock import enumerate_basis, sector_slices
from .invariants import report_dict, run_invariant_suites


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker count override")
    p.add_argument("--seed", type=int, default=None, help="RNG seed override")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="focklab",
                                     description="semiclassical Fock-space laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "classical", "scaling", "hepp"):
        _add_common(sub.add_parser(name))
    p_info = sub.add_parser("basis-info")
    p_info.add_argument("--d", type=int, required=True)
    p_info.add_argument("--nmax", type=int, required=True)
    args = parser.parse_args(argv)

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except FocklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "basis-info":
        basis = enumerate_basis(args.d, args.nmax)
        sizes = [s.stop - s.start for s in sector_slices(args.d, args.nmax)]
        print(json.dumps({"d": args.d, "n_max": args.nmax, "dim": int(basis.shape[0]),
                          "sector_sizes": sizes}))
        return 0

    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    if args.command == "check":
        space, symbol = load_model(cfg.model_path)
        # smallest sweep epsilon: keeps the eps <= 1/3 suites active
        # whenever the sweep reaches the semiclassical regime
        results = run_invariant_suites(space, symbol, cfg.phi0, min(cfg.epsilons), cfg.seed)
        report = report_dict(results)
        with open(os.path.join(out_dir, "invariants.json"), "w") as fh:
            json.dump(report, fh, indent=1)
        for r in results:
            margin = "" if r.margin is None else f" margin={r.margin:.3e}"
            print(f"{r.status:>4}  {r.name}{margin}  {r.detail}")
        return 0 if report["all_pass"] else 1

    if args.command == "classical":
        space, symbol = load_model(cfg.model_path)
        traj = evolve_classical(space, symbol, cfg.phi0, cfg.T, nsteps=cfg.steps)
        path = os.path.join(out_dir, "classical.csv")
        trajectory_to_csv(traj, path)
        print(f"wrote {path} (endpoint error estimate {traj.richardson_error:.3e})")
        return 0

    if args.command == "scaling":
        result = run_scaling(cfg, out_dir)
        for t, (slope, resid) in sorted(result.slopes.items()):
            print(f"t={t}: slope={slope:.4f} rms_residual={resid:.4f}")
        if result.invalid:
            print(f"truncation-invalidated epsilons: {result.invalid}", file=sys.stderr)
            return 2
        return 0

    if args.command == "hepp":
        rows = run_hepp(cfg, out_dir)
        for r in rows:
            print(f"eps={r['epsilon']}: t={r['time']} error={r['abs_error']:.6e}")
        return 0

    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
