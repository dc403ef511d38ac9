"""Command-line interface for the EBDG solver."""
import argparse
import sys
from pathlib import Path

from pydantic import ValidationError

from ebdg import EBDGSolver, __version__
from ebdg.config_validation import RunConfig, validate_configuration
from ebdg.utils import halving_levels, parse_fraction, parse_levels, parse_list, parse_orders


def _merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _overrides(args: argparse.Namespace) -> dict:
    """Configuration entries given on the command line."""
    overrides: dict = {}

    def put(section: str, key: str, value):
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    case = getattr(args, "case", None)
    if case is not None:
        overrides["setup"] = {"mode": "case", "case": case}
    put("setup", "h", getattr(args, "h", None))
    put("setup", "mach", getattr(args, "mach", None))
    put("setup", "end_time", getattr(args, "end_time", None))
    put("discretization", "p", getattr(args, "p", None))
    put("discretization", "scheme", getattr(args, "scheme", None))
    put("discretization", "interpolation", getattr(args, "interpolation", None))
    put("limiter", "mode", getattr(args, "limiter", None))
    put("run", "max_steps", getattr(args, "max_steps", None))
    put("output", "output_directory", getattr(args, "output", None))
    put("processing", "max_workers", getattr(args, "workers", None))
    return overrides


def build_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        base = validate_configuration(args.config).model_dump(exclude_none=True)
    return RunConfig.model_validate(_merge(base, _overrides(args)))


def _format_validation_error(e: ValidationError) -> str:
    problems = [f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors()]
    return f"Invalid configuration ({len(problems)} problems): " + "; ".join(problems)


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--output", type=str, help="Output directory (default: ./output)")
    parser.add_argument("--workers", type=int, help="Maximum number of worker processes")


def _add_case_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("config", type=str, nargs="?", help="Path to the YAML configuration file")
    parser.add_argument("--case", type=str, help="Built-in case: advect1d, shock1d, sod_periodic, dmr, cylinder")
    parser.add_argument("--p", type=int, help="Polynomial order (1-4)")
    parser.add_argument("--scheme", type=str, help="Time integration: forward_euler, ssprk33, rk4_classic (rk4)")
    parser.add_argument("--mach", type=float, help="Shock Mach number of shock1d")
    parser.add_argument("--limiter", type=str, help="Limiter mode: entropy, positivity, none")
    _add_common_arguments(parser)


def main(argv: list[str] | None = None):
    """Main CLI entry point."""
    parser = argparse.ArgumentParser(
        prog="ebdg",
        description="EBDG: entropy-bounded discontinuous Galerkin solver for the compressible Euler equations",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  ebdg run config.yaml
  ebdg run --case advect1d --p 2 --h 1/40 --scheme rk4
  ebdg cfl-table --shapes line,quad,triangle --orders 1..4
  ebdg convergence --case advect1d --p 2 --scheme rk4 --levels 1/10,1/20,1/40,1/80,1/160
  ebdg --version
        """
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"ebdg {__version__}"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Run command
    run_parser = subparsers.add_parser("run", help="Run a simulation from a configuration file or a built-in case")
    _add_case_arguments(run_parser)
    run_parser.add_argument("--h", type=parse_fraction, help="Element size, e.g. 1/40")
    run_parser.add_argument("--end-time", dest="end_time", type=float, help="Override of the end time")
    run_parser.add_argument("--max-steps", dest="max_steps", type=int, help="Stop after this many steps")

    # CFL table command
    cfl_parser = subparsers.add_parser("cfl-table", help="Compute optimal time-step numbers for reference elements")
    cfl_parser.add_argument("--shapes", type=parse_list, default=["line", "quad", "triangle"],
                            help="Comma separated shapes (default: line,quad,triangle)")
    cfl_parser.add_argument("--orders", type=parse_orders, default=[1, 2, 3, 4],
                            help="Polynomial orders, e.g. 1..4 or 1,2 (default: 1..4)")
    cfl_parser.add_argument("--interpolation", type=str, choices=["lagrange", "full"],
                            help="Representation of the surface states (default: lagrange)")
    _add_common_arguments(cfl_parser)

    # Convergence command
    convergence_parser = subparsers.add_parser("convergence", help="Run a mesh convergence study of a built-in case")
    _add_case_arguments(convergence_parser)
    convergence_parser.add_argument("--levels", type=parse_levels,
                                    help="Comma separated element sizes (default: 1/10 halved five times)")
    convergence_parser.add_argument("--end-time", dest="end_time", type=float, help="Override of the end time")

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(0)

    try:
        if getattr(args, "config", None) and not Path(args.config).exists():
            print(f"Error: Configuration file not found: {args.config}", file=sys.stderr)
            sys.exit(1)
        config = build_config(args)

        if args.command == "run":
            if config.setup is None:
                print("Error: Give a configuration file or --case", file=sys.stderr)
                sys.exit(1)
            EBDGSolver(config).run()
        elif args.command == "cfl-table":
            EBDGSolver(config).cfl_table(args.shapes, args.orders)
        elif args.command == "convergence":
            levels = args.levels or halving_levels(0.1, 5)
            EBDGSolver(config).convergence_study(levels)
        sys.exit(0)

    except ValidationError as e:
        print(f"Error: {_format_validation_error(e)}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        reason = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"Error: {args.command} failed: {reason}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
