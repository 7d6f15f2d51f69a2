"""Batch driver: every computation and acceptance suite as a subcommand with a JSON report.

Reports go to standard output, the human summary to standard error. Exit codes are
0 when every check passes, 1 when a check fails and 2 for usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from . import checks
from .errors import QLensError
from .expr import normalize
from .groupoid import embed_normalform
from .json_validator import load_json_source
from .models import CheckReport, RunConfig
from .structure import symbol

logger = logging.getLogger(__name__)

CONFIG_FIELDS = ("q", "l", "N", "W", "tol", "margin", "seed", "samples")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("run configuration")
    group.add_argument("--config", help="JSON file with RunConfig keys")
    group.add_argument("--q", type=float, help="deformation parameter, 0 < q < 1")
    group.add_argument("--l", type=int, help="lens parameter l >= 1")
    group.add_argument("--N", type=int, help="truncation level count")
    group.add_argument("--W", type=int, help="half width of the window in t")
    group.add_argument("--tol", type=float, help="tolerance of the verifications")
    group.add_argument("--margin", type=int, help="edge-safety margin")
    group.add_argument("--seed", type=int, help="seed of the samplers")
    group.add_argument("--samples", type=int, help="random samples per check")
    verbosity = group.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings only")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="qlens",
        description="Computations and checks for the quantum lens spaces L_q(l; 1, l).",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("normalize", parents=[common], help="normal form of an expression")
    p.add_argument("expression")

    p = sub.add_parser("symbol", parents=[common], help="symbol of an expression")
    p.add_argument("expression")

    for name, help_text in (
        ("verify-relations", "rewrite rules as operator identities"),
        ("check-faithful", "normal form zero iff the representation vanishes"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--grid", action="store_true", help="run l in {1,2,3} x q in {.3,.5,.8}")

    sub.add_parser("groupoid-check", parents=[common], help="groupoid and convolution laws")
    sub.add_parser("grading-check", parents=[common], help="grading and line bundle models")
    sub.add_parser("structure-check", parents=[common], help="symbol map and Toeplitz loops")

    p = sub.add_parser("classify", parents=[common], help="classify a projection file")
    p.add_argument("path", nargs="?", help="projection JSON; omit to run the classification suite")

    p = sub.add_parser("line-bundle", parents=[common], help="line bundles as projective modules")
    p.add_argument("--n", type=int, help="degree; omit for n in [-4, 4] and l in {1, 2, 3}")

    sub.add_parser("report-all", parents=[common], help="every suite")
    sub.add_parser("serve", parents=[common], help="run the MCP tool server over stdio")
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("qlens")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then explicit flags."""
    values: dict[str, Any] = {}
    if args.config:
        values.update(load_json_source(args.config))
    for field in CONFIG_FIELDS:
        value = getattr(args, field, None)
        if value is not None:
            values[field] = value
    return RunConfig(**values)


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _summarize(report: CheckReport) -> None:
    for check in report.checks:
        logger.info(
            "%-4s %s (max deviation %.3e, %d samples)",
            "ok" if check.passed else "FAIL",
            check.name,
            check.max_deviation,
            check.samples,
        )
    logger.info("%s: %s", report.command, "passed" if report.passed else "FAILED")


def _run_report(args: argparse.Namespace, config: RunConfig) -> CheckReport:
    command = args.command
    if command in ("verify-relations", "check-faithful"):
        return checks.SUITES[command](config, grid=args.grid)
    if command == "classify":
        return checks.classify(config, args.path)
    if command == "line-bundle":
        return checks.line_bundle(config, args.n)
    return checks.run_suite(command, config)


def dispatch(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.command == "normalize":
        _emit({"normalform": normalize(args.expression, config.l).format()})
        return EXIT_OK
    if args.command == "symbol":
        nf = normalize(args.expression, config.l)
        _emit({"symbol": symbol(embed_normalform(nf, config.rep_params())).to_json()})
        return EXIT_OK
    if args.command == "serve":
        from .server import mcp

        mcp.run()
        return EXIT_OK
    report = _run_report(args, config)
    _emit(report.model_dump(mode="json"))
    _summarize(report)
    return EXIT_OK if report.passed else EXIT_FAILED


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    configure_logging(args)
    try:
        return dispatch(args)
    except (QLensError, ValidationError, ValueError) as e:
        logger.error("%s", e)
        _emit({"error": str(e), "type": type(e).__name__})
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
