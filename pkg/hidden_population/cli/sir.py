from argparse import ArgumentParser, Namespace, _SubParsersAction
from logging import getLogger
from pathlib import Path
from time import perf_counter

from ..exceptions import UsageError
from ..io import read_counts, sir_frame, write_table
from ..sir_screening import (
    HOTSPOT_THRESHOLDS,
    NO_TIER,
    PRIOR_ALPHA,
    PRIOR_NU,
    add_exceedance,
    compute_sir,
    flag_hotspots,
)
from .constants import SIR_FILE, Subcommand
from .helpers import (
    RunManifest,
    log_command,
    output_directory,
    parse_list,
    staged_output,
    write_manifest,
)

logger = getLogger("hidden_population")


def add_parser(subparsers: _SubParsersAction, parent: ArgumentParser) -> None:
    parser = subparsers.add_parser(
        Subcommand.SIR.value,
        parents=[parent],
        help="standardized incidence ratios and exceedance hot spots",
    )
    parser.add_argument("--counts", help="CSV: region,time,count,population")
    parser.add_argument(
        "--thresholds", default=",".join(f"{value:.2f}" for value in HOTSPOT_THRESHOLDS)
    )
    parser.add_argument("--nu", type=float, default=PRIOR_NU)
    parser.add_argument("--prior-alpha", type=float, default=PRIOR_ALPHA)
    parser.set_defaults(handler=run_sir, command_parser=parser)


@log_command
def run_sir(args: Namespace) -> Path:
    started = perf_counter()
    if args.counts is None:
        raise UsageError("sir needs --counts")

    thresholds = parse_list(args.thresholds, "--thresholds")
    table = add_exceedance(
        compute_sir(read_counts(args.counts)), nu=args.nu, alpha=args.prior_alpha
    )
    tiers = flag_hotspots(table, thresholds)

    directory = output_directory(args, Subcommand.SIR.value)
    with staged_output(directory) as stage:
        write_table(sir_frame(table, tiers), stage / SIR_FILE)
        write_manifest(
            RunManifest(
                subcommand=Subcommand.SIR.value,
                config={
                    "thresholds": list(thresholds),
                    "nu": args.nu,
                    "prior_alpha": args.prior_alpha,
                },
                inputs={"counts": str(args.counts)},
                outputs=[SIR_FILE],
                duration_seconds=perf_counter() - started,
            ),
            stage,
        )

    logger.info(
        f"Flagged {int((tiers != NO_TIER).sum())} of {tiers.size} cells in {directory}"
    )
    return directory
