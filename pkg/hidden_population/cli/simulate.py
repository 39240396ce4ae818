from argparse import ArgumentParser, Namespace, _SubParsersAction
from logging import getLogger
from pathlib import Path
from time import perf_counter

from ..exceptions import UsageError
from ..io import write_panel, write_truth
from ..simulation import (
    DgpConfig,
    EpsLaw,
    ScenarioRescale,
    lambda_of,
    make_lambda_scenario,
    simulate,
)
from ..spatial_structure import parse_grid, write_adjacency
from .constants import ADJACENCY_FILE, PANEL_FILE, TRUTH_FILE, Subcommand
from .helpers import (
    RunManifest,
    log_command,
    model_config,
    output_directory,
    staged_output,
    write_manifest,
)

logger = getLogger("hidden_population")


def add_parser(subparsers: _SubParsersAction, parent: ArgumentParser) -> None:
    parser = subparsers.add_parser(
        Subcommand.SIMULATE.value,
        parents=[parent],
        help="simulate a panel from the spatial frontier DGP",
    )
    parser.add_argument("--grid", default="7x7", help="queen grid as RxC")
    parser.add_argument("--periods", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--lambda",
        dest="target_lambda",
        type=float,
        default=None,
        help="rescale the error scales to hit (sigma_eta + sigma_u) / sigma_eps",
    )
    parser.add_argument(
        "--lambda-mode",
        choices=[mode.value for mode in ScenarioRescale],
        default=ScenarioRescale.NOISE.value,
    )
    parser.add_argument(
        "--student-t-df",
        type=float,
        default=None,
        help="draw eps from a scaled Student-t with this many degrees of freedom",
    )
    parser.set_defaults(handler=run_simulate, command_parser=parser)


def dgp_config(args: Namespace) -> DgpConfig:
    rows, cols = parse_grid(args.grid)
    fields = {"rows": rows, "cols": cols, "periods": args.periods, "seed": args.seed}

    if args.student_t_df is not None:
        fields |= {"eps_law": EpsLaw.STUDENT_T, "student_t_df": args.student_t_df}

    config = DgpConfig(**fields)

    if args.target_lambda is not None:
        config = make_lambda_scenario(
            args.target_lambda, config, ScenarioRescale(args.lambda_mode)
        )
    elif args.lambda_mode != ScenarioRescale.NOISE.value:
        raise UsageError("--lambda-mode needs --lambda")

    return config


@log_command
def run_simulate(args: Namespace) -> Path:
    started = perf_counter()
    config = dgp_config(args)
    truth = simulate(config)

    directory = output_directory(args, Subcommand.SIMULATE.value)
    with staged_output(directory) as stage:
        write_panel(truth.dataset, stage / PANEL_FILE)
        write_truth(truth, stage / TRUTH_FILE)
        write_adjacency(truth.graph, stage / ADJACENCY_FILE)

        write_manifest(
            RunManifest(
                subcommand=Subcommand.SIMULATE.value,
                config={**model_config(config), "lambda": lambda_of(config)},
                seed=config.seed,
                outputs=[PANEL_FILE, TRUTH_FILE, ADJACENCY_FILE],
                duration_seconds=perf_counter() - started,
            ),
            stage,
        )

    logger.info(f"Wrote {truth.n_cells} panel rows to {directory}")
    return directory
