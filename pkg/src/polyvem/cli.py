"""Command line entry point: ``polyvem {convergence,strip,block,solve}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, apply_overrides, defaults_for, load_config
from .studies import run_convergence_study, run_finite_strain_block, run_plasticity_strip, run_single_solve

COMMANDS = {
    "convergence": ("convergence", run_convergence_study),
    "strip": ("plasticity_strip", run_plasticity_strip),
    "block": ("finite_strain_block", run_finite_strain_block),
    "solve": ("single_solve", run_single_solve),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyvem", description="Virtual element solver for nonlinear solids on polygonal meshes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (study, _) in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {study.replace('_', ' ')} study")
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (assembly is vectorized; must be >= 1)")
        p.add_argument("--seed", type=int, help="seed for the Voronoi generator")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config entry")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _print_summary(command: str, result) -> None:
    if command == "convergence":
        print(f"{'N_h':>7} {'E_0inf':>12} {'R_0inf':>7} {'E_12':>12} {'R_12':>7}")
        for r in result.rows:
            r0 = f"{r.R_0inf:7.2f}" if r.R_0inf is not None else "      -"
            r1 = f"{r.R_12:7.2f}" if r.R_12 is not None else "      -"
            print(f"{r.N_h:7d} {r.E_0inf:12.4e} {r0} {r.E_12:12.4e} {r1}")
    elif command == "strip":
        for r in result.rows + ([result.reference] if result.reference else []):
            print(f"{r.label:>18} N_h={r.N_h:6d} A={r.displ_A:.5f} B={r.displ_B:.5f} sigma_max={r.sigma_max:.4f} sigma_T={r.sigma_T:.4f}")
    elif command == "block":
        for r in result.rows:
            print(f"{r.variant:>10} N_h={r.N_h:6d} ux={r.ux:.5f} uy={r.uy:.5f}")
    elif command == "solve" and result.history is not None:
        u = result.history.final.values
        print(f"N_h={result.mesh.n_vertices} max|u|={abs(u).max():.6e}")
    for msg in result.failures:
        print(f"FAILED: {msg}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    study, runner = COMMANDS[args.command]
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = defaults_for(study)
        if args.config:
            cfg = load_config(args.config, cfg)
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v
        apply_overrides(cfg, overrides, source="--set")
        if cfg.study != study:
            raise ConfigError(f"config declares study {cfg.study!r} but the command runs {study!r}")
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = runner(cfg, cfg.out)
    _print_summary(args.command, result)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
