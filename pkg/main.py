import argparse
import json
import logging
import sys

from cli.commands import CHECKS, cmd_archive, cmd_check, cmd_quadrature, cmd_sample
from cli.config import DEFAULT_PATHS, DEFAULT_TUPLES, build_config
from core.errors import HarnessError, InvalidParams
from spectral.spectral import DEFAULT_N
from storage.db import DEFAULT_DB_URL

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
INTERNAL_EXIT_CODE = 3


class HarnessArgumentParser(argparse.ArgumentParser):
    """Turns usage errors into InvalidParams so they get the JSON diagnostic and exit code 2."""

    def error(self, message):
        raise InvalidParams(message)


def _add_params(parser: argparse.ArgumentParser):
    parser.add_argument("--eta", type=float, default=0.0, help="Parameter η")
    parser.add_argument("--theta", type=float, default=0.0, help="Parameter θ")
    parser.add_argument("--q", type=float, default=0.0, help="Deformation parameter q in [-1, 1]")
    parser.add_argument("--normalize", action="store_true", help="Reduce to η > 0 and θ = ±η first and report the map")
    parser.add_argument("--seed", type=int, help="Random seed (default: $QHARNESS_SEED or 0)")
    parser.add_argument("--output", help="Output file (default under data/runs/)")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv", help="Output file format")


def build_parser() -> argparse.ArgumentParser:
    parser = HarnessArgumentParser(description="Bi-Poisson quadratic harness toolkit")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    verbosity.add_argument("--quiet", action="store_true", help="Log warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=HarnessArgumentParser)

    sample = sub.add_parser("sample", help="Sample paths on a time grid")
    _add_params(sample)
    sample.add_argument("--grid", required=True, help="start:stop:step or a comma list starting at 0")
    sample.add_argument("--paths", type=int, default=DEFAULT_PATHS, help="Number of paths")
    sample.add_argument("--N", type=int, default=DEFAULT_N, help="Quadrature order for |q| < 1")
    sample.add_argument(
        "--single-step",
        dest="through_boundary",
        action="store_false",
        help="q = 1: cross θ/η in one negative binomial step instead of stopping there",
    )

    quad = sub.add_parser("quadrature", help="Nodes and weights of π_t or P_{s,t}(x, ·)")
    _add_params(quad)
    quad.add_argument("--t", type=float, required=True, help="Time t")
    quad.add_argument("--s", type=float, default=0.0, help="Start time s of the kernel")
    quad.add_argument("--x", type=float, help="Start state x of the kernel (omit for the marginal)")
    quad.add_argument("--N", type=int, default=DEFAULT_N, help="Quadrature order")

    check = sub.add_parser("check", help="Run a verification suite")
    check.add_argument("which", choices=CHECKS, help="Suite to run")
    _add_params(check)
    check.add_argument("--n-max", dest="n_max", type=int, help="Largest polynomial degree checked")
    check.add_argument("--tuples", type=int, default=DEFAULT_TUPLES, help="Random rational tuples per identity")
    check.add_argument("--times", help="Comma-separated times, e.g. 0.5,1,2")
    check.add_argument("--grid", help="q = 1 moment grid")
    check.add_argument("--x", type=float, help="Single start state instead of the π_s nodes")
    check.add_argument("--paths", type=int, default=DEFAULT_PATHS, help="Monte Carlo paths for q = 1")
    check.add_argument("--N", type=int, default=DEFAULT_N, help="Quadrature order")
    check.add_argument("--tolerance", type=float, help="Override the suite's default tolerance")
    check.add_argument("--db", help="Also archive the reports in this database URL")

    archive = sub.add_parser("archive", help="Report archive")
    archive.add_argument("action", choices=("ingest", "summary"), help="Ingest a JSON-lines file or summarise")
    archive.add_argument("file", nargs="?", help="Report file for ingest")
    archive.add_argument("--db", default=DEFAULT_DB_URL, help="Database URL")
    return parser


def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(args) -> int:
    if args.command == "archive":
        return cmd_archive(args.action, args.file, args.db)

    options = {k: v for k, v in vars(args).items() if k not in ("command", "which", "verbose", "quiet")}
    config = build_config(**options)
    if args.command == "sample":
        return cmd_sample(config)
    if args.command == "quadrature":
        return cmd_quadrature(config)
    return cmd_check(config, args.which)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args)
        return run(args)
    except HarnessError as e:
        logger.debug(f"{type(e).__name__}: {e}")
        sys.stderr.write(
            json.dumps({"error": type(e).__name__, "message": str(e), "exit_code": e.exit_code}) + "\n"
        )
        return e.exit_code
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        sys.stderr.write(
            json.dumps(
                {"error": "InternalError", "message": f"{type(e).__name__}: {e}", "exit_code": INTERNAL_EXIT_CODE}
            )
            + "\n"
        )
        return INTERNAL_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
