from argparse import ArgumentParser, Namespace, _SubParsersAction
from dataclasses import asdict
from logging import getLogger
from pathlib import Path
from time import perf_counter

import pandas as pd

from ..exceptions import UsageError
from ..io import coverage_frame, mape_frame, read_draws, read_truth, write_table
from ..posterior_analysis import (
    CellGrouping,
    coverage_report,
    hidden_population_intervals,
    lambda_summary,
    latent_summary,
    mape_summary,
    uncaptured_by_cell,
    uncaptured_summaries,
)
from ..streams import make_stream
from .constants import (
    COMPONENTS_FILE,
    COVERAGE_FILE,
    DEFAULT_LEVELS,
    LATENT_FILE,
    MAPE_FILE,
    UNCAPTURED_FILE,
    Subcommand,
)
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
        Subcommand.ANALYZE.value,
        parents=[parent],
        help="coverage, MAPE and uncaptured shares from stored draws",
    )
    parser.add_argument("--draws", help="draws directory written by fit")
    parser.add_argument("--truth", help="truth CSV written by simulate")
    parser.add_argument(
        "--levels", default=None, help="HDI levels, default 0.90,0.95,0.99"
    )
    parser.add_argument("--beta-draws", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--by-region", action="store_true")
    parser.add_argument("--by-period", action="store_true")
    parser.set_defaults(handler=run_analyze, command_parser=parser)


def grouping(args: Namespace) -> CellGrouping:
    if args.by_region and args.by_period:
        raise UsageError("--by-region and --by-period are mutually exclusive")
    if args.by_region:
        return CellGrouping.REGION
    if args.by_period:
        return CellGrouping.PERIOD

    return CellGrouping.CELL


@log_command
def run_analyze(args: Namespace) -> Path:
    started = perf_counter()
    if args.draws is None:
        raise UsageError("analyze needs --draws")
    if args.levels is not None and args.truth is None:
        raise UsageError("coverage levels need --truth")
    if args.beta_draws < 100:
        raise UsageError(f"--beta-draws must be at least 100, got {args.beta_draws}")

    group = grouping(args)
    levels = (
        DEFAULT_LEVELS if args.levels is None else parse_list(args.levels, "--levels")
    )

    draws = read_draws(args.draws)
    components = uncaptured_summaries(draws)
    lambda_stat = lambda_summary(draws)

    tables = {
        UNCAPTURED_FILE: uncaptured_by_cell(draws, group),
        COMPONENTS_FILE: pd.DataFrame(
            [
                {
                    **asdict(components),
                    "lambda_hdi_lower": lambda_stat.hdi_lower,
                    "lambda_hdi_upper": lambda_stat.hdi_upper,
                }
            ]
        ),
    }

    inputs = {"draws": str(args.draws)}
    if args.truth is not None:
        inputs["truth"] = str(args.truth)
        truth = read_truth(args.truth)
        rng = make_stream(args.seed)

        reports = [
            coverage_report(
                hidden_population_intervals(draws, truth.y_level, level),
                truth,
                level,
                args.beta_draws,
                rng,
            )
            for level in levels
        ]
        tables[COVERAGE_FILE] = coverage_frame(reports)
        tables[MAPE_FILE] = mape_frame(
            {
                "point": mape_summary(draws, truth),
                "per_draw": mape_summary(draws, truth, per_draw=True),
            }
        )
        tables[LATENT_FILE] = latent_summary(draws, truth)

    directory = output_directory(args, Subcommand.ANALYZE.value)
    with staged_output(directory) as stage:
        for name, frame in tables.items():
            write_table(frame, stage / name)

        write_manifest(
            RunManifest(
                subcommand=Subcommand.ANALYZE.value,
                config={
                    "levels": list(levels) if args.truth is not None else [],
                    "beta_draws": args.beta_draws,
                    "grouping": group.value,
                },
                seed=args.seed,
                inputs=inputs,
                outputs=sorted(tables),
                duration_seconds=perf_counter() - started,
            ),
            stage,
        )

    logger.info(f"Wrote {', '.join(sorted(tables))} to {directory}")
    return directory
