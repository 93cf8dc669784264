"""Command-line interface for pco_sync.

Usage:
    python -m pco_sync prf-check --family tanh --epsilon 0.4
    python -m pco_sync bounds --scenario two_node --eps-bar 1.0
    python -m pco_sync simulate --scenario desk18 --simulator pulse
    python -m pco_sync sweep --experiment table1 --jobs 4
    python -m pco_sync desync-census --experiment census
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import yaml

from . import __version__
from .analysis import check_theorem1, check_theorem2, rate_bounds
from .config import PRESET_KINDS, Config, ExperimentConfig, ScenarioConfig, list_presets, resolve_preset
from .experiments import desync_census, run_grid, run_scenario
from .output import CELL_HEADER, cell_rows, format_grid_table, write_csv, write_json
from .prf import (
    HALF_PI,
    CustomPrf,
    PhaseResponseFunction,
    SinePrf,
    TanhPrf,
    validate_admissibility,
    verify_theorem5_negativity,
)
from .utils import load_document, save_text, to_jsonable

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _emit(data: dict[str, Any], fmt: str) -> None:
    """Print a report to stdout as JSON, key/value CSV or an aligned listing."""
    data = to_jsonable(data)
    if fmt == "json":
        print(json.dumps(data, indent=2))
        return
    flat = {k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in data.items()}
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(flat.items())
        print(buffer.getvalue(), end="")
        return
    width = max((len(k) for k in flat), default=0)
    for key, value in flat.items():
        print(f"{key.ljust(width)}  {value}")


def _output_dir(args: argparse.Namespace, config: Config) -> Path:
    return Path(args.output) if args.output else config.output_dir


def _load_config() -> Optional[Config]:
    config = Config.from_env()
    errors = config.validate()
    for error in errors:
        logger.error(error)
    return None if errors else config


def _build_prf(args: argparse.Namespace) -> PhaseResponseFunction:
    if args.table:
        return CustomPrf.from_csv(Path(args.table))
    if args.family == "sine":
        return SinePrf(args.amplitude)
    if args.epsilon is None:
        raise ValueError("--epsilon is required for the tanh family")
    return TanhPrf(args.epsilon)


def prf_check_command(args: argparse.Namespace) -> int:
    """Check admissibility of a PRF, plus the epsilon monotonicity of tanh PRFs.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code (0 if every check passes, 1 otherwise)
    """
    config = _load_config()
    if config is None:
        return EXIT_USAGE
    grid = args.grid or config.grid_points

    prf = _build_prf(args)
    admissibility = validate_admissibility(prf, grid)
    result: dict[str, Any] = {"prf": prf.to_dict(), "admissibility": admissibility.to_dict()}
    passed = admissibility.passed

    if isinstance(prf, TanhPrf):
        eps_values = args.theorem5_eps or [prf.epsilon]
        theorem5 = verify_theorem5_negativity(eps_values, grid)
        result["epsilon_monotonicity"] = theorem5.to_dict()
        passed = passed and theorem5.passed

    result = {"passed": passed, **result}
    _emit(result, args.format)
    if args.output:
        write_json(result, Path(args.output) / "prf_check.json")

    if not passed:
        for x in admissibility.sign_violations[:10]:
            logger.warning(f"Sign condition violated at x={x:.6f}")
        logger.error(f"PRF check failed for {prf.describe()}")
        return EXIT_CHECK_FAILED
    logger.info(f"PRF check passed for {prf.describe()}")
    return EXIT_OK


def bounds_command(args: argparse.Namespace) -> int:
    """Compute alpha1 (eps_bar < pi/2) or alpha2 (eps_bar >= pi/2) for a scenario.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    config = _load_config()
    if config is None:
        return EXIT_USAGE
    grid = args.grid or config.grid_points

    scenario = ScenarioConfig.load(args.scenario, defaults=config)
    topo = scenario.topology
    bounds = rate_bounds(topo, scenario.qg, scenario.ql, args.eps_bar, grid)

    result: dict[str, Any] = {
        "config": scenario.to_dict(),
        "eps_bar": args.eps_bar,
        "bounds": bounds.to_dict(),
    }
    if args.eps_bar < HALF_PI:
        result["conditions"] = check_theorem1(topo).to_dict()
    else:
        result["conditions"] = check_theorem2(topo, scenario.qg, scenario.ql, args.eps_bar, grid).to_dict()

    _emit(result, args.format)
    if args.output:
        write_json(result, Path(args.output) / f"{scenario.name}_bounds.json")
    return EXIT_OK


def simulate_command(args: argparse.Namespace) -> int:
    """Simulate one scenario and write its trajectory and summary.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    config = _load_config()
    if config is None:
        return EXIT_USAGE

    path = resolve_preset("scenarios", args.scenario)
    data = load_document(path)
    overrides = {"simulator": args.simulator, "dt": args.dt, "t_max": args.t_max}
    data.update({k: v for k, v in overrides.items() if v is not None})
    scenario = ScenarioConfig.from_dict(data, base_dir=path.parent, defaults=config)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    logger.info(f"Simulating {scenario.name} with the {scenario.simulator} simulator")

    outcome = run_scenario(scenario, scenario.draw_initial())
    trajectory = outcome["trajectory"]

    output_dir = _output_dir(args, config)
    write_csv(
        trajectory.header(),
        trajectory.to_rows(),
        output_dir / f"{scenario.name}_trajectory.csv",
        config=scenario.to_dict(),
    )
    summary = {
        "config": scenario.to_dict(),
        "converged": outcome["converged"],
        "t_sync": outcome["t_sync"],
        "energy": outcome["energy"],
        "elapsed": outcome["elapsed"],
        "alpha_hat": outcome["alpha_hat"],
        "status": outcome["status"],
        "guaranteed": outcome["guaranteed"],
        "dt": scenario.step,
        "t_max": outcome["t_max"],
    }
    write_json(summary, output_dir / f"{scenario.name}_summary.json")

    _emit({k: v for k, v in summary.items() if k != "config"}, args.format)
    if not outcome["converged"]:
        logger.warning(f"No synchronization within t_max={outcome['t_max']:g} ({outcome['status']})")
    return EXIT_OK


def _load_experiment(args: argparse.Namespace, config: Config) -> ExperimentConfig:
    experiment = ExperimentConfig.load(args.experiment, defaults=config)
    if args.seed is not None:
        experiment = experiment.with_seed(args.seed)
    if args.runs is not None:
        experiment = replace(experiment, runs=args.runs)
    return experiment


def sweep_command(args: argparse.Namespace) -> int:
    """Run a Monte Carlo grid and write CSV, JSON and text-table reports.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    config = _load_config()
    if config is None:
        return EXIT_USAGE

    experiment = _load_experiment(args, config)
    jobs = args.jobs or config.jobs
    report = run_grid(experiment, jobs=jobs, show_progress=not args.quiet)

    output_dir = _output_dir(args, config)
    rows = cell_rows(report)
    table = format_grid_table(report)
    write_csv(CELL_HEADER, rows, output_dir / f"{experiment.name}.csv", config=report.config)
    write_json(report.to_dict(), output_dir / f"{experiment.name}.json")
    table_path = output_dir / f"{experiment.name}.txt"
    save_text(table, table_path)

    if args.format == "table":
        print(table, end="")
    elif args.format == "csv":
        print(table_path.with_suffix(".csv").read_text(encoding="utf-8"), end="")
    else:
        print(json.dumps(to_jsonable(report.to_dict(include_runs=False)), indent=2))
    return EXIT_OK


def desync_census_command(args: argparse.Namespace) -> int:
    """Count runs that fail to synchronize within t_max.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    config = _load_config()
    if config is None:
        return EXIT_USAGE

    experiment = _load_experiment(args, config)
    census = desync_census(experiment, jobs=args.jobs or config.jobs, show_progress=not args.quiet)
    result = census.to_dict()
    write_json(result, _output_dir(args, config) / f"{experiment.name}_census.json")
    _emit({k: v for k, v in result.items() if k != "config"}, args.format)
    return EXIT_OK


def presets_command(args: argparse.Namespace) -> int:
    """List shipped topologies, scenarios and experiments.

    Args:
        args: Parsed command-line arguments

    Returns:
        Exit code
    """
    found = False
    for kind in PRESET_KINDS:
        names = list_presets(kind)
        if not names:
            continue
        found = True
        print(f"\n{kind.capitalize()}")
        print("=" * 50)
        for name in names:
            try:
                data = load_document(resolve_preset(kind, name))
                description = data.get("description") or data.get("name", "")
                print(f"  {name:<16} {description}")
            except Exception as e:
                print(f"  {name} (error loading: {e})")

    if not found:
        print("No presets found. Create YAML files in the presets/ directory.")
        return EXIT_CHECK_FAILED
    print("\nUsage: python -m pco_sync simulate --scenario <name>")
    return EXIT_OK


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the CLI."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Override the master seed")
    common.add_argument(
        "--output",
        "-o",
        type=str,
        help="Output directory (default: PCO_OUTPUT_DIR or out)",
    )
    common.add_argument(
        "--format",
        choices=["csv", "json", "table"],
        default="table",
        help="Format of the report printed to stdout (default: table)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    verbosity.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Only log warnings and suppress progress bars",
    )

    parser = argparse.ArgumentParser(
        prog="pco_sync",
        description="Simulate and analyze pulse-coupled oscillator networks synchronizing to a global cue",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # prf-check command
    prf_parser = subparsers.add_parser("prf-check", parents=[common], help="Validate a phase response function")
    prf_parser.add_argument("--family", choices=["tanh", "sine"], default="tanh", help="PRF family (default: tanh)")
    prf_parser.add_argument("--epsilon", type=float, help="Tanh steepness epsilon")
    prf_parser.add_argument("--amplitude", type=float, default=1.0, help="Sine amplitude (default: 1)")
    prf_parser.add_argument("--table", type=str, help="Two-column CSV table (angle_rad, value)")
    prf_parser.add_argument("--grid", type=int, help="Grid points (default: PCO_GRID_POINTS)")
    prf_parser.add_argument(
        "--theorem5-eps",
        type=float,
        nargs="+",
        help="Epsilons for the tanh monotonicity check (default: the PRF's epsilon)",
    )
    prf_parser.set_defaults(func=prf_check_command)

    # bounds command
    bounds_parser = subparsers.add_parser("bounds", parents=[common], help="Compute synchronization rate bounds")
    bounds_parser.add_argument("--scenario", "-s", required=True, help="Scenario preset name or file")
    bounds_parser.add_argument("--eps-bar", type=float, required=True, help="Half-width of the deviation box (rad)")
    bounds_parser.add_argument("--grid", type=int, help="Grid points (default: PCO_GRID_POINTS)")
    bounds_parser.set_defaults(func=bounds_command)

    # simulate command
    sim_parser = subparsers.add_parser("simulate", parents=[common], help="Simulate a single scenario")
    sim_parser.add_argument("--scenario", "-s", required=True, help="Scenario preset name or file")
    sim_parser.add_argument("--simulator", choices=["ode", "pulse"], help="Override the scenario's simulator")
    sim_parser.add_argument("--dt", type=float, help="Override the ODE step size (s)")
    sim_parser.add_argument("--t-max", type=float, help="Override the time limit (s)")
    sim_parser.set_defaults(func=simulate_command)

    # sweep and desync-census commands
    for name, func, help_text in (
        ("sweep", sweep_command, "Run a Monte Carlo parameter grid"),
        ("desync-census", desync_census_command, "Count runs that never synchronize"),
    ):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("--experiment", "-e", required=True, help="Experiment preset name or file")
        sub.add_argument("--runs", type=int, help="Override runs per cell")
        sub.add_argument("--jobs", "-j", type=int, help="Worker processes (default: PCO_JOBS)")
        sub.set_defaults(func=func)

    # presets command
    presets_parser = subparsers.add_parser("presets", help="List shipped presets")
    presets_parser.set_defaults(func=presets_command)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    if getattr(args, "verbose", False):
        logging.getLogger().setLevel(logging.DEBUG)
    elif getattr(args, "quiet", False):
        logging.getLogger().setLevel(logging.WARNING)

    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, yaml.YAMLError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"Error during {args.command}: {e}")
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
