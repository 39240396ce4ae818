import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path

from .. import __version__, configure_logging
from ..config import settings
from . import analyze, fit, simulate, sir
from .constants import ExitCode
from .error_handler import error_handler
from .helpers import config_defaults, load_config_file


def build_parser() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    parent.add_argument(
        "--out", help=f"output directory (default {settings.output_root}/<command>)"
    )
    parent.add_argument("--config", help="key=value file of flag defaults")
    parent.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    parent.add_argument("--log-file", help="also append log records to this file")

    parser = ArgumentParser(
        prog="hidden-population",
        description="Bayesian spatial frontier model for hidden populations",
    )
    parser.add_argument("--version", action="version", version=__version__)

    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (simulate, fit, analyze, sir):
        command.add_parser(subparsers, parent)

    return parser


def apply_config_file(
    parser: ArgumentParser, args: Namespace, argv: list[str]
) -> Namespace:
    """Re-parse with config file values as defaults, so explicit flags win."""
    values = load_config_file(Path(args.config))
    args.command_parser.set_defaults(**config_defaults(values, args))

    return parser.parse_args(argv)


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(
        "DEBUG" if args.verbose else None,
        Path(args.log_file) if args.log_file else None,
    )

    try:
        if args.config is not None:
            args = apply_config_file(parser, args, argv)
        args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:
        return error_handler(exc)

    return ExitCode.OK
