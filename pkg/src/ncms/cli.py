"""Command line entry point: ``ncms <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .adversary import simulate_attack
from .config import ConfigError, NetworkConfig, load_config, validate_config
from .error_analysis import bound_terms, pe_th_curve, pe_th_total, simulate_pe
from .optimizer import InfeasibleError, solve_problem1, solve_problem2
from .relay import crossover_profile

EXIT_OK, EXIT_COMPARE, EXIT_CONFIG = 0, 1, 2

_CFG_FLAGS = [  # (flag, field, type)
    ("--L", "L", int), ("--L-C", "L_C", int), ("--N-C", "N_C", int), ("--alpha", "alpha", float),
    ("--M", "M", int), ("--snr-db", "snr_db", float), ("--rho", "rho", float),
    ("--sigma2-ac", "sigma2_ac", float), ("--n", "n", int), ("--d", "d", float),
]


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="key = value (or .json) config file")
    for flag, dest, typ in _CFG_FLAGS:
        p.add_argument(flag, dest=dest, type=typ)
    p.add_argument("--seed", type=int, default=None)


def _add_run_flags(p, trials=100_000):
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--workers", type=int, default=1)


def _resolve(args) -> NetworkConfig:
    over = {dest: getattr(args, dest) for _, dest, _ in _CFG_FLAGS if getattr(args, dest) is not None}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.config:
        return load_config(args.config, **over)
    return validate_config(NetworkConfig(**over))


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=harness._jsonable)
    if out:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_simulate(args):
    cfg = _resolve(args)
    st = simulate_pe(cfg, args.trials, seed=cfg.seed, decoder=args.decoder)
    _emit({"config": cfg.to_dict(), **st.to_dict()}, args.out)
    return EXIT_OK


def cmd_bound(args):
    cfg = _resolve(args)
    if args.alpha_grid:
        lo, hi, k = args.alpha_grid
        alphas = np.linspace(lo, hi, int(k))
        _emit({"alpha": alphas.tolist(), "pe_th": pe_th_curve(cfg, alphas).tolist()}, args.out)
        return EXIT_OK
    prof = crossover_profile(cfg)
    _emit({"config": cfg.to_dict(), "pe_th": pe_th_total(cfg, prof), "profile": prof.to_dict(),
           "terms": bound_terms(cfg.alpha, cfg.noise_power, cfg.M).as_dict()}, args.out)
    return EXIT_OK


def cmd_attack(args):
    cfg = _resolve(args)
    r = simulate_attack(cfg, args.frames, seed=cfg.seed, mode=args.mode)
    _emit({"config": cfg.to_dict(), **r.summary()}, args.out)
    return EXIT_OK


def cmd_optimize(args):
    cfg = _resolve(args)
    if args.problem == 2:
        sol = solve_problem2(cfg.L, cfg.N_C, cfg.snr_db, args.delta, cfg.M, base=cfg)
    else:
        sol = solve_problem1(cfg, args.delta, args.trials, cfg.seed, frames=args.frames)
    _emit(sol.record(), args.out)
    return EXIT_OK


def cmd_reproduce(args):
    cfg = _resolve(args)
    opts = {"problem1": True} if args.problem1 else {}
    spec = harness.ExperimentSpec(args.target, base=cfg, trials=args.trials, frames=args.frames,
                                  seed=cfg.seed, out_dir=args.out, options=opts)
    bundle = harness.run(spec, workers=args.workers)
    for k, v in bundle.files.items():
        print(f"{k}: {v}")
    status = EXIT_OK
    if args.target in ("table1", "table2"):
        report = harness.compare_to_reference(bundle, args.target)
        print("\n".join(report.lines()))
        status = report.exit_code
    for f in bundle.failures:
        print(f"point failed: {f}", file=sys.stderr)
    return EXIT_COMPARE if bundle.failures else status


def cmd_compare(args):
    bundle = harness.load_bundle(args.summary)
    report = harness.compare_to_reference(bundle, args.reference)
    print("\n".join(report.lines()) or "no cells compared")
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncms", description="Mimicry countermeasure simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo error rate at one operating point")
    _add_config_flags(p); _add_run_flags(p)
    p.add_argument("--decoder", choices=("disjoint", "jmap"), default="disjoint")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="closed-form error bound")
    _add_config_flags(p); _add_run_flags(p)
    p.add_argument("--alpha-grid", nargs=3, type=float, metavar=("LO", "HI", "POINTS"))
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("attack", help="adversary's residual entropy")
    _add_config_flags(p); _add_run_flags(p)
    p.add_argument("--frames", type=int, default=10_000)
    p.add_argument("--mode", choices=("coherent", "energy"), default="coherent")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("optimize", help="solve for (alpha, L_C)")
    _add_config_flags(p); _add_run_flags(p)
    p.add_argument("--problem", type=int, choices=(1, 2), default=2)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--frames", type=int, default=2000)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("reproduce", help="regenerate a figure's data or a table")
    p.add_argument("target", choices=[e for e in harness.EXPERIMENTS if e != "custom"])
    _add_config_flags(p); _add_run_flags(p)
    p.add_argument("--frames", type=int, default=10_000)
    p.add_argument("--problem1", action="store_true", help="also run the simulation-constrained problem")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("compare", help="check a summary file against the reference tables")
    p.add_argument("summary", type=Path)
    p.add_argument("--reference", choices=("table1", "table2"), default="table1")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
