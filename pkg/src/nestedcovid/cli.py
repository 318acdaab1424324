"""Command line front end.

Every subcommand loads a scenario (the bundled baseline unless ``--config``
is given), applies ``--set section.key=value`` overrides, writes its CSV
files into the output directory and finishes with ``manifest.json``.

Exit status: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import NoTransmissionError, ParameterDomainError, bifurcation_quantities, critical_beta, routh_hurwitz
from .between_host import PARAMETER_NAMES, simulate_between_host
from .config import ScenarioConfig, dumps_config, load_config
from .coupling import EmptyWindowError, coupling_summary
from .integrator import IntegrationError
from .interventions import effective_R, effectiveness_table
from .records import write_csv
from .sensitivity import UndefinedElasticityError, write_elasticity_csv
from .sweeps import (
    INFLUENCE_HORIZON,
    INFLUENCE_PARAMETERS,
    REFERENCE_HEAT_GRIDS,
    bifurcation_sweep,
    heat_grid,
    within_host_influence,
    write_bifurcation_csv,
    write_heat_grid_csv,
)
from .within_host import InvariantViolation, simulate_within_host

OUTPUT_ENV = "NESTEDCOVID_OUT"

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
NUMERICAL_ERRORS = (
    IntegrationError,
    InvariantViolation,
    ParameterDomainError,
    NoTransmissionError,
    UndefinedElasticityError,
    EmptyWindowError,
    ArithmeticError,
)


class UsageError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid_axis(text: str):
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"grid axis must be name:lo:hi:n, got {text!r}")
    name, lo, hi, n = parts
    try:
        return name, float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid axis must be name:lo:hi:n, got {text!r}") from None


def _range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(":")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must be lo:hi, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (default: bundled baseline)")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${OUTPUT_ENV} or the scenario's output.directory)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a scenario value; repeatable")
    common.add_argument("--workers", type=int, help="threads for grid evaluations")

    parser = argparse.ArgumentParser(prog="nestedcovid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="within-host run, N_h, and between-host trajectory")
    sub.add_parser("analyze", parents=[common], help="R0, equilibria, eigenvalues and Routh-Hurwitz coefficients")
    p = sub.add_parser("elasticity", parents=[common], help="elasticity indices of R0")
    p.add_argument("--rel-step", type=float, default=1e-6, help="relative step of the finite-difference check")
    p = sub.add_parser("bifurcate", parents=[common], help="equilibrium branches along beta")
    p.add_argument("--range", type=_range, metavar="LO:HI", help="beta range (default 0.5 to 2 times the critical beta)")
    p.add_argument("--points", type=int, default=101)
    p = sub.add_parser("heatmap", parents=[common], help="R0 over a two-parameter grid")
    p.add_argument("--grid", type=_grid_axis, action="append", default=[], metavar="NAME:LO:HI:N",
                   help="axis specification, given twice (x then y)")
    p.add_argument("--preset", choices=sorted(REFERENCE_HEAT_GRIDS), help="use a named reference rectangle instead of --grid")
    p.add_argument("--points", type=int, default=51, help="grid size per axis for --preset")
    p = sub.add_parser("interventions", parents=[common], help="comparative effectiveness table")
    p.add_argument("--levels", type=_floats, help="comma-separated efficacy levels")
    p = sub.add_parser("influence", parents=[common], help="I(t) as a within-host rate varies")
    p.add_argument("--vary", choices=INFLUENCE_PARAMETERS, required=True)
    p.add_argument("--values", type=_floats, required=True)
    p.add_argument("--horizon", type=float, default=INFLUENCE_HORIZON)
    return parser


def _coupled(config: ScenarioConfig):
    summary = coupling_summary(
        config.within_host, config.wh_initial, float(config.wh_horizon), float(config.detection_limit), config.integrator
    )
    return summary, config.between_host.replace(N_h=summary.N_h)


def run_simulate(config, args, out: Path) -> list[Path]:
    wh_traj = simulate_within_host(config.within_host, config.wh_initial, config.wh_horizon, config.integrator)
    summary, params = _coupled(config)
    bh_traj = simulate_between_host(params, config.bh_initial, config.bh_horizon, config.bh_integrator)
    paths = [out / "within_host.csv", out / "coupling.csv", out / "between_host.csv"]
    wh_traj.to_csv(paths[0], time_label="s")
    summary.to_csv(paths[1])
    bh_traj.to_csv(paths[2], time_label="t")
    return paths


def run_analyze(config, args, out: Path) -> list[Path]:
    summary, params = _coupled(config)
    record = {"N_h": summary.N_h, **routh_hurwitz(params).to_record()}
    bif = bifurcation_quantities(params)
    record.update(beta_star=bif.beta_star, bifurcation_a=bif.a_coeff, bifurcation_b=bif.b_coeff)
    eff = config.efficacies
    if eff.acts_within_host or eff.rho:
        record["R_E"] = effective_R(params, config.within_host, eff, config.coupling_setup)
    path = out / "stability.csv"
    write_csv(path, list(record), [list(record.values())])
    return [path]


def run_elasticity(config, args, out: Path) -> list[Path]:
    _, params = _coupled(config)
    path = out / "elasticity.csv"
    write_elasticity_csv(path, params, args.rel_step)
    return [path]


def run_bifurcate(config, args, out: Path) -> list[Path]:
    _, params = _coupled(config)
    if args.range is None:
        beta_star = critical_beta(params)
        beta_range = (0.5 * beta_star, 2.0 * beta_star)
    else:
        beta_range = args.range
    grid = bifurcation_sweep(params, beta_range, args.points, workers=config.workers)
    path = out / "bifurcation.csv"
    write_bifurcation_csv(path, grid)
    return [path]


def run_heatmap(config, args, out: Path) -> list[Path]:
    _, params = _coupled(config)
    if args.preset:
        if args.grid:
            raise UsageError("give either --preset or --grid, not both")
        (xn, xlo, xhi), (yn, ylo, yhi) = REFERENCE_HEAT_GRIDS[args.preset]
        axes = [(xn, xlo, xhi, args.points), (yn, ylo, yhi, args.points)]
    else:
        axes = args.grid
    if len(axes) != 2:
        raise UsageError("heatmap needs exactly two --grid axes (or --preset)")
    for name, *_ in axes:
        if name not in PARAMETER_NAMES:
            raise UsageError(f"unknown grid parameter {name!r}; choose from {', '.join(PARAMETER_NAMES)}")
    grid = heat_grid(params, axes[0], axes[1], workers=config.workers)
    path = out / "heatmap.csv"
    write_heat_grid_csv(path, grid)
    return [path]


def run_interventions(config, args, out: Path) -> list[Path]:
    _, params = _coupled(config)
    levels = args.levels if args.levels is not None else config.levels
    table = effectiveness_table(params, config.within_host, levels, config.coupling_setup, workers=config.workers)
    path = out / "interventions.csv"
    table.to_csv(path)
    return [path]


def run_influence(config, args, out: Path) -> list[Path]:
    family = within_host_influence(
        config.within_host,
        config.between_host,
        args.vary,
        args.values,
        horizon=args.horizon,
        wh_initial=config.wh_initial,
        wh_horizon=config.wh_horizon,
        bh_initial=config.bh_initial,
        detection_limit=config.detection_limit,
        config=config.integrator,
        bh_config=config.bh_integrator,
        workers=config.workers,
    )
    paths = [out / f"influence_{args.vary}.csv", out / f"influence_{args.vary}_final.csv"]
    family.to_csv(paths[0])
    write_csv(paths[1], ("parameter", "value", "N_h", "I_final"),
              [(family.parameter, r.value, r.N_h, r.final_I) for r in family.runs])
    return paths


COMMANDS = {
    "simulate": run_simulate,
    "analyze": run_analyze,
    "elasticity": run_elasticity,
    "bifurcate": run_bifurcate,
    "heatmap": run_heatmap,
    "interventions": run_interventions,
    "influence": run_influence,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, argv: list[str], config_text: str, outputs: list[Path], started: str) -> Path:
    inputs = json.dumps({"command": command, "argv": argv, "config": config_text}, sort_keys=True)
    manifest = {
        "command": command,
        "argv": argv,
        "inputs_sha256": hashlib.sha256(inputs.encode()).hexdigest(),
        "versions": {"nestedcovid": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "started": started,
        "finished": _timestamp(),
        "files": {p.name: _sha256(p) for p in outputs},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def resolve_output_dir(args, config: ScenarioConfig) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(config.output_dir)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    started = _timestamp()
    try:
        overrides = list(args.overrides)
        if args.workers is not None:
            overrides.append(f"output.workers={args.workers}")
        config = load_config(args.config, overrides)
        config_text = dumps_config(config)
        out = resolve_output_dir(args, config)
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](config, args, out)
        scenario = out / "scenario.ini"
        scenario.write_text(config_text)
        write_manifest(out, args.command, argv, config_text, [*outputs, scenario], started)
    except NUMERICAL_ERRORS as exc:
        print(f"nestedcovid {args.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, NameError) as exc:
        print(f"nestedcovid {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"nestedcovid {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in outputs:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
