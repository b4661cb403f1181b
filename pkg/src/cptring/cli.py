"""Command-line front end: ``cptring <scenario> [options]``.

Exit status: 0 when the result was written, 2 for an invalid configuration,
3 when the computation raised an invariant or integration failure, 1 for I/O
errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .evolution import IntegrationError, InvariantViolation
from .model import SystemParams, site_index
from .scenarios import (
    PRESETS,
    SWEEP_PARAMETERS,
    ConfigError,
    OutputSpec,
    ScenarioConfig,
    SweepSpec,
    emit,
    preset_config,
    run_scenario,
)
from .spectra import SpectrumError

_SUBCOMMANDS = ("spectrum", "evolve", "contrast", "reciprocity", "sweep", "mc")


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON scenario file; flags override its values")
    p.add_argument("--n-pairs", type=int, help="number of gain/loss pairs (N = 2 n)")
    p.add_argument("--j-over-kappa", type=float)
    p.add_argument("--e-over-kappa", type=float)
    p.add_argument("--delta-over-kappa", type=float)
    p.add_argument("--drive-site", help="driven cavity label, e.g. a1 or b3")
    p.add_argument("--gamma-out-over-kappa", type=float)
    p.add_argument("--noise", dest="noise", action="store_true", default=None)
    p.add_argument("--no-noise", dest="noise", action="store_false")
    p.add_argument("--t-final", type=float, help="end time in units of 1/kappa")
    p.add_argument("--dt-out", type=float, help="output spacing (default t_final/800)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="worker processes for sweeps (default: all cores)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cptring", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name in _SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "contrast":
            sp.add_argument("--pair", action="append", default=None,
                            help="site pair like a1:b1 (repeatable)")
        if name == "reciprocity":
            sp.add_argument("--site-fwd", help="gain cavity driven forward (default a1)")
            sp.add_argument("--site-bwd", help="loss cavity driven backward (default b_n)")
        if name == "sweep":
            sp.add_argument("--param", choices=SWEEP_PARAMETERS)
            sp.add_argument("--values", help="comma-separated values")
        if name == "mc":
            sp.add_argument("--n-traj", type=int)
            sp.add_argument("--mc-dt", type=float, help="Euler-Maruyama step in units of 1/kappa (default 1e-3 / max(1, 2J/kappa))")
    sp = sub.add_parser("preset", parents=[common])
    sp.add_argument("name", choices=PRESETS)
    return parser


def _scenario_name(command: str) -> str:
    return "figure-preset" if command == "preset" else command


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    """Merge defaults, an optional config file, and command-line flags."""
    scenario = _scenario_name(args.command)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        data["scenario"] = scenario
        if scenario == "figure-preset":
            data["preset"] = args.name
        cfg = ScenarioConfig.from_dict(data)
    elif scenario == "figure-preset":
        cfg = preset_config(args.name)
    else:
        sweep = SweepSpec("j_over_kappa") if scenario == "sweep" else None
        cfg = ScenarioConfig(system=SystemParams(3), scenario=scenario, sweep=sweep)

    system = cfg.system
    k = system.kappa
    if args.n_pairs is not None:
        drive_site = system.drive.site_index
        system = replace(system, n_pairs=args.n_pairs,
                         drive=replace(system.drive, site_index=min(drive_site, 2 * args.n_pairs - 1)))
    if args.j_over_kappa is not None:
        system = replace(system, coupling_j=args.j_over_kappa * k)
    if args.e_over_kappa is not None:
        system = system.with_drive(amplitude_e=args.e_over_kappa * k)
    if args.delta_over_kappa is not None:
        system = system.with_drive(detuning_delta=args.delta_over_kappa * k)
    if args.drive_site is not None:
        system = system.with_drive(site_index=site_index(args.drive_site))
    if args.gamma_out_over_kappa is not None:
        system = replace(system, gamma_out=args.gamma_out_over_kappa * k)
    if args.noise is not None:
        system = replace(system, noise_enabled=args.noise)

    changes = {"system": system}
    if args.t_final is not None:
        changes["t_final"] = args.t_final
    if args.dt_out is not None:
        changes["dt_out"] = args.dt_out
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    fmt = args.format
    if fmt is None and args.out:
        fmt = "json" if args.out.endswith(".json") else "csv"
    changes["output"] = OutputSpec(args.out if args.out else cfg.output.path,
                                   fmt or cfg.output.format)
    if getattr(args, "pair", None):
        changes["pairs"] = tuple(tuple(site_index(s) for s in p.split(":")) for p in args.pair)
    if getattr(args, "site_fwd", None):
        changes["site_fwd"] = site_index(args.site_fwd)
    if getattr(args, "site_bwd", None):
        changes["site_bwd"] = site_index(args.site_bwd)
    if getattr(args, "n_traj", None) is not None:
        changes["n_traj"] = args.n_traj
    if getattr(args, "mc_dt", None) is not None:
        changes["mc_dt"] = args.mc_dt
    if scenario == "sweep" and (getattr(args, "param", None) or getattr(args, "values", None) is not None):
        old = cfg.sweep or SweepSpec("j_over_kappa")
        values = old.values
        if args.values is not None:
            values = tuple(float(v) for v in args.values.split(",") if v.strip())
        changes["sweep"] = SweepSpec(args.param or old.parameter, values)
    return replace(cfg, **changes)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"cptring: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cptring: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_scenario(cfg)
    except (InvariantViolation, IntegrationError, SpectrumError) as exc:
        print(f"cptring: computation failed: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # Parameter checks that need the full system (drive sites, MC step size).
        print(f"cptring: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        text = emit(result)
    except OSError as exc:
        print(f"cptring: {exc}", file=sys.stderr)
        return 1
    if cfg.output.path is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
