"""
Command-line entry point for gradfamily.
Subcommands: solve, diagnose, ft2d, bench, profile.
"""
import argparse
import sys
from typing import List, Optional, Sequence

from gradfamily import __version__
from gradfamily.cli.commands import (
    RunContext,
    cmd_bench,
    cmd_diagnose,
    cmd_ft2d,
    cmd_profile,
    cmd_solve,
)
from gradfamily.core.config import ConfigService, ConfigurationError
from gradfamily.core.logging import get_logger, setup_logging
from gradfamily.services.error_handling import ErrorHandlingService

logger = get_logger("main")


class UsageError(Exception):
    """Raised by the argument parser instead of exiting with status 2."""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports errors as exceptions so they map to exit 64."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_problem_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--spectrum", choices=["isqrt", "uniform1n", "twodim"], help="Named spectrum")
    group.add_argument("--set", type=int, choices=range(1, 8), metavar="{1..7}", help="Spectrum set")
    parser.add_argument("--n", type=int, default=None, help="Dimension (default GRADFAMILY_DIMENSION)")
    parser.add_argument("--kappa", type=float, default=None, help="Condition number")
    parser.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    parser.add_argument("--b-range", dest="b_range", default=None, help="'lo:hi' or 'zero'")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gradfamily", description="Gradient methods with stepsize g'Psi(A)g/g'Psi(A)Ag")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    solve = sub.add_parser("solve", help="Run one schedule and write its trace")
    _add_problem_flags(solve)
    solve.add_argument("--representation", choices=["diagonal", "rotated"], default=None)
    solve.add_argument("--schedule", required=True, help="Schedule string, e.g. mg or alg1:bb1:sd:30:15:15")
    solve.add_argument("--eps", type=float, default=1e-6)
    solve.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    solve.add_argument("--trace-level", dest="trace_level", choices=["summary", "scalars", "eigen"], default="scalars")
    solve.add_argument("--alpha0", default="exact-sd", help="exact-sd or fixed:<c>")
    solve.add_argument("--track-tilde", dest="track_tilde", action="store_true")
    solve.add_argument("--out", default="trace.csv", help="Trace CSV path, '-' for stdout")
    solve.set_defaults(handler=cmd_solve)

    diagnose = sub.add_parser("diagnose", help="Two-cycle diagnostics of a family run")
    _add_problem_flags(diagnose)
    diagnose.add_argument("--psi", default="sd", help="sd, mg or u<int>")
    diagnose.add_argument("--eps", type=float, default=1e-12)
    diagnose.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    diagnose.add_argument("--tail", type=int, default=20)
    diagnose.add_argument("--exclusion", choices=["reciprocal", "literal"], default="reciprocal")
    diagnose.add_argument("--out", default=".", help="Output directory")
    diagnose.set_defaults(handler=cmd_diagnose)

    ft2d = sub.add_parser("ft2d", help="Finite termination on diag{1, lambda}")
    ft2d.add_argument("--lambdas", default="10,100,1000,10000")
    ft2d.add_argument("--starts", type=int, default=10)
    ft2d.add_argument("--seed", type=int, default=1)
    ft2d.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    ft2d.set_defaults(handler=cmd_ft2d)

    bench = sub.add_parser("bench", help="Run the benchmark grid")
    bench.add_argument("--sets", default=None, help="Comma list of sets 1..7")
    bench.add_argument("--kappas", default=None)
    bench.add_argument("--epsilons", default=None)
    bench.add_argument("--n", type=int, default=None)
    bench.add_argument("--replicates", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--methods", default=None, help="Comma list of schedule strings")
    bench.add_argument("--km-ks", dest="km_ks", default=None, help="Comma list like 9x9,13x15")
    bench.add_argument("--kb", default="per-set", help="'per-set' (100 for sets 1, 5; 30 otherwise) or an integer")
    bench.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    bench.add_argument("--workers", type=int, default=None)
    bench.add_argument("--out", default=".", help="Output directory")
    bench.set_defaults(handler=cmd_bench)

    profile = sub.add_parser("profile", help="Performance profile of a report.csv")
    profile.add_argument("--in", dest="input", required=True)
    profile.add_argument("--metric", default="iterations")
    profile.add_argument("--out", default=None, help="CSV path, '-' for stdout")
    profile.set_defaults(handler=cmd_profile)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv: List[str] = list(sys.argv[1:] if argv is None else argv)
    errors = ErrorHandlingService()
    run_id = errors.run_id_generator.generate(argv)

    try:
        config_service = ConfigService()
        config_service.validate_environment()
        config = config_service.get_config()
    except ConfigurationError as e:
        return errors.emit(errors.handle_exception(e, run_id))

    setup_logging(log_level=config.log_level, enable_json=config.log_json, run_id=run_id)

    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return errors.emit(errors.create_usage_error(str(e), run_id))

    logger.info(f"Command {args.command} [run_id: {run_id}]", extra={"run_id": run_id})
    try:
        return args.handler(args, RunContext(config=config, run_id=run_id))
    except Exception as e:
        return errors.emit(errors.handle_exception(e, run_id))


if __name__ == "__main__":
    sys.exit(main())
