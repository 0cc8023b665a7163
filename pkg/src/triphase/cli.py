"""Command-line front end: bounds tables, Monte Carlo runs, preset studies."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import SingularInformationError, ZZSettings, bound_records
from .config import ConfigError, load_config
from .experiments import (
    ExperimentSpec,
    export_bound_records,
    export_gap_grid,
    export_particle_cloud,
    export_records,
    n1_gap_grid,
    rect_prior_run,
    run_monte_carlo,
    spec_to_dict,
    sweep_rho,
    sweep_sigma,
)
from .particle_filter import DegeneratePosteriorError, UndefinedMeanError
from .priors import NonDerivablePriorError, gaussian_prior

DEFAULT_REPRODUCE_SEED = 20260810

FIG3_RHOS = (0.0, 0.25, -0.25, 0.4)
FIG5_SIGMAS = (0.2, 0.25, 0.3, 0.35, 0.4)
FIG6_DELTAS = (0.4, 0.6)
FULL_SCHEDULE = (1, 2, 5, 10, 20, 50, 100, 200)
DESK_SCHEDULE = (1, 2, 5, 10, 20, 50, 100)

_COMPUTE_ERRORS = (NonDerivablePriorError, SingularInformationError,
                   DegeneratePosteriorError, UndefinedMeanError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triphase",
        description="Bayesian two-phase estimation in a three-mode interferometer: "
                    "simulation, particle-filter posteriors, and risk lower bounds.",
    )
    parser.add_argument("--version", action="version", version=f"triphase {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate CRB / Van Trees / Ziv-Zakai over a probe schedule")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1, help="worker cap (results unaffected)")

    p = sub.add_parser("simulate", help="Monte Carlo estimation runs aggregated against the bounds")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override run.master_seed")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1, help="worker cap (results unaffected)")

    p = sub.add_parser("reproduce", help="run a built-in study preset")
    p.add_argument("figure", choices=("fig3", "fig4", "fig5", "fig6"),
                   help="fig3: correlation sweep; fig4: N=1 gap grids; "
                        "fig5: width sweep with posterior clouds; fig6: rectangular priors")
    p.add_argument("--scale", choices=("full", "desk"), default="desk",
                   help="desk caps N and repetitions at 100 for wall-clock limits")
    p.add_argument("--out", required=True, help="parent output directory")
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default {DEFAULT_REPRODUCE_SEED})")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1, help="worker cap (results unaffected)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "bounds":
            return _cmd_bounds(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_reproduce(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _write_manifest(outdir: Path, payload: dict) -> None:
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({"artifact_version": __version__, **payload}, fh, indent=2)
        fh.write("\n")


def _cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.spec
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    records = bound_records(
        spec.interferometer, spec.prior, spec.n_schedule, spec.zz_settings,
        crb=spec.compute_crb, vt=spec.compute_vt, zz=spec.compute_zz,
        threads=args.threads,
    )
    name = f"bounds.{args.format}"
    export_bound_records(records, outdir / name, args.format, settings=spec.zz_settings)
    _write_manifest(outdir, {"command": "bounds", "config": spec_to_dict(spec),
                             "format": args.format, "files": [name]})
    print(outdir / name)
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    result = run_monte_carlo(cfg.spec, threads=args.threads)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    name = f"records.{args.format}"
    export_records(result, outdir / name, args.format)
    _write_manifest(outdir, {"command": "simulate", "config": spec_to_dict(cfg.spec),
                             "format": args.format, "files": [name]})
    print(outdir / name)
    return 0


def _preset_base(label: str, sigma: float, scale: str, seed: int) -> ExperimentSpec:
    desk = scale == "desk"
    return ExperimentSpec(
        prior=gaussian_prior([1.1, 2.0], sigma, 0.0),
        n_schedule=DESK_SCHEDULE if desk else FULL_SCHEDULE,
        k=100 if desk else 300,
        master_seed=seed,
        config_id=f"{label}-{scale}",
    )


def _cmd_reproduce(args) -> int:
    scale = args.scale
    seed = args.seed if args.seed is not None else DEFAULT_REPRODUCE_SEED
    fmt = args.format
    outdir = Path(args.out) / args.figure
    outdir.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    if args.figure == "fig3":
        base = _preset_base("fig3", 0.25, scale, seed)
        for rho, res in sweep_rho(base, FIG3_RHOS, threads=args.threads).items():
            name = f"rho_{rho:g}.{fmt}"
            export_records(res, outdir / name, fmt)
            files.append(name)
        config = spec_to_dict(base)
        config["sweep"] = {"rho": list(FIG3_RHOS)}

    elif args.figure == "fig4":
        base = _preset_base("fig4", 0.2, scale, seed)
        if scale == "desk":
            mu1 = (0.8, 1.1, 1.4)
            mu2 = (1.7, 2.0, 2.3)
        else:
            mu1 = tuple(np.linspace(0.8, 1.4, 5))
            mu2 = tuple(np.linspace(1.7, 2.3, 5))
        for rule in ("matched", "zero", "anti"):
            grid = n1_gap_grid(base, mu1, mu2, rule, threads=args.threads)
            name = f"gaps_{rule}.csv"
            export_gap_grid(grid, outdir / name)
            files.append(name)
        config = spec_to_dict(base)
        config["grid"] = {"mu1": [float(x) for x in mu1], "mu2": [float(x) for x in mu2],
                          "rules": ["matched", "zero", "anti"]}

    elif args.figure == "fig5":
        base = _preset_base("fig5", 0.25, scale, seed)
        results = sweep_sigma(base, FIG5_SIGMAS, threads=args.threads)
        for sig, res in results.items():
            name = f"sigma_{sig:g}.{fmt}"
            export_records(res, outdir / name, fmt)
            files.append(name)
            if res.clouds:
                cloud_name = f"cloud_sigma_{sig:g}.csv"
                export_particle_cloud(res.clouds[0], outdir / cloud_name)
                files.append(cloud_name)
        config = spec_to_dict(base)
        config["sweep"] = {"sigma": list(FIG5_SIGMAS)}

    else:  # fig6
        base = _preset_base("fig6", 0.25, scale, seed)
        for delta, res in rect_prior_run(base, FIG6_DELTAS, threads=args.threads).items():
            name = f"delta_{delta:g}.{fmt}"
            export_records(res, outdir / name, fmt)
            files.append(name)
        config = spec_to_dict(base)
        config["sweep"] = {"delta": list(FIG6_DELTAS)}

    _write_manifest(outdir, {
        "command": "reproduce", "figure": args.figure, "scale": scale,
        "master_seed": seed, "format": fmt, "files": files, "config": config,
    })
    print(outdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
