"""
Stokes-Darcy solver lab

Command-line front end: single solves, parameter sweeps, grid convergence
studies and condition-number tables of the monolithic Stokes-Darcy systems,
all written as CSV.

Exit codes: 0 success, 1 unexpected library error, 2 configuration or
parameter error, 3 at least one case did not converge, 4 capability error.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from config import (
    COMMANDS,
    FORMULATIONS,
    FRACTIONAL_VARIANTS,
    LOG_LEVELS,
    PRECONDITIONERS,
    RunConfig,
    config,
    load_run_file,
)
from utils.errors import (
    CapabilityError,
    ConfigurationError,
    ConvergenceFailure,
    InputError,
    ParameterError,
    StokesDarcyError,
)
from utils.params import parse_float_list

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_CAPABILITY = 4

PHYSICAL_PAIR = ("mu", "k")
DIMENSIONLESS_PAIR = ("S", "Da")


def _int_list(text: str):
    values = parse_float_list(text)
    if any(v != int(v) for v in values):
        raise ParameterError(f"Expected a comma separated list of integers, got {text!r}")
    return tuple(int(v) for v in values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-darcy",
        description="Monolithic Stokes-Darcy solves with parameter-robust preconditioners",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", dest="config_file", help="key=value run file")

    problem = parser.add_argument_group("problem")
    problem.add_argument("--formulation", choices=FORMULATIONS)
    problem.add_argument("--precond", choices=PRECONDITIONERS)
    problem.add_argument("--boundary", choices=("example21", "appendixC"))
    problem.add_argument("--nx", type=int)
    problem.add_argument("--ny-s", dest="ny_s", type=int)
    problem.add_argument("--ny-d", dest="ny_d", type=int)
    problem.add_argument("--mu", type=float)
    problem.add_argument("--k", type=float)
    problem.add_argument("--alpha", type=float)
    problem.add_argument("--S", dest="S", type=float)
    problem.add_argument("--Da", dest="Da", type=float)
    problem.add_argument("--beta-n", dest="beta_n", help="'consistent' or a fixed positive value")
    problem.add_argument("--fractional", choices=FRACTIONAL_VARIANTS)

    grid = parser.add_argument_group("grids")
    grid.add_argument("--S-values", dest="S_values")
    grid.add_argument("--Da-values", dest="Da_values")
    grid.add_argument("--alpha-values", dest="alpha_values")
    grid.add_argument("--nx-values", dest="nx_values")
    grid.add_argument("--preset")

    solver = parser.add_argument_group("solver")
    solver.add_argument("--seed", type=int)
    solver.add_argument("--reduction", type=float)
    solver.add_argument("--max-iter", dest="max_iter", type=int)
    solver.add_argument("--check-symmetry", dest="check_symmetry", action="store_true", default=None)

    output = parser.add_argument_group("output")
    output.add_argument("--out")
    output.add_argument("--dump-matrix", dest="dump_matrix", metavar="DIR")
    output.add_argument("--spectrum-out", dest="spectrum_out")
    timing = output.add_mutually_exclusive_group()
    timing.add_argument(
        "--timing", dest="record_timing", action="store_true", default=None,
        help="record wall_time_s (repeated runs then differ in that column)",
    )
    timing.add_argument("--no-timing", dest="record_timing", action="store_false", default=None)
    output.add_argument("--log-level", dest="log_level", type=str.upper, choices=LOG_LEVELS)
    return parser


def _merge_pairs(file_values: Dict[str, Any], cli_values: Dict[str, Any]) -> Dict[str, Any]:
    """Layer CLI values over run-file values; a CLI parameter pair replaces the file's other pair"""
    merged = dict(file_values)
    if any(name in cli_values for name in PHYSICAL_PAIR):
        for name in DIMENSIONLESS_PAIR:
            merged.pop(name, None)
    if any(name in cli_values for name in DIMENSIONLESS_PAIR):
        for name in PHYSICAL_PAIR:
            merged.pop(name, None)
    merged.update(cli_values)
    return merged


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """
    Build the RunConfig of one invocation

    Precedence: CLI flags, then the run file, then the environment defaults.
    """
    cli_values = {
        name: value
        for name, value in vars(args).items()
        if value is not None and name not in ("command", "config_file", "log_level")
    }
    for name in ("S_values", "Da_values", "alpha_values"):
        if name in cli_values:
            cli_values[name] = parse_float_list(cli_values[name])
    if "nx_values" in cli_values:
        cli_values["nx_values"] = _int_list(cli_values["nx_values"])

    file_values = load_run_file(args.config_file) if args.config_file else {}
    values = {
        "reduction": config.solver.reduction,
        "max_iter": config.solver.max_iter,
        "dense_threshold": config.solver.dense_threshold,
        "fractional": config.solver.fractional_variant,
        "check_symmetry": config.solver.symmetry_check,
        "record_timing": config.system.record_timing,
    }
    values.update(_merge_pairs(file_values, cli_values))
    return RunConfig(command=args.command, **values)


def configure_logging(level: Optional[str] = None):
    logging_config = config.get_logging_config()
    if level is not None:
        logging_config["level"] = getattr(logging, level)
    root = logging.getLogger()
    if root.handlers:
        # already configured (repeated main() calls, test runners)
        root.setLevel(logging_config["level"])
        return
    logging.basicConfig(
        level=logging_config["level"],
        format=logging_config["format"],
        handlers=[logging.FileHandler(config.system.log_file), logging.StreamHandler()],
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    # Imported here so --help stays fast
    from experiments.coordinator import ExperimentCoordinator

    try:
        cfg = run_config_from_args(args)
        coordinator = ExperimentCoordinator()
        outcome = coordinator.dispatch(cfg)
        logger.info(f"{cfg.command} finished: {len(outcome.table)} rows written to {outcome.path}")
        logger.debug(f"Run statistics: {json.dumps(coordinator.get_stats(), default=str)}")
        if not outcome.all_converged:
            raise ConvergenceFailure(f"At least one {cfg.command} case did not converge; see {outcome.path}")
        return EXIT_OK
    except (ConfigurationError, ParameterError, InputError) as e:
        logger.error(f"Invalid configuration: {str(e)}", exc_info=True)
        return EXIT_CONFIG
    except ConvergenceFailure as e:
        logger.error(str(e), exc_info=True)
        return EXIT_NOT_CONVERGED
    except CapabilityError as e:
        logger.error(f"Capability error: {str(e)}", exc_info=True)
        return EXIT_CAPABILITY
    except StokesDarcyError as e:
        logger.error(f"Run failed: {str(e)}", exc_info=True)
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"I/O error: {str(e)}", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
