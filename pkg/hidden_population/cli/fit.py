from argparse import ArgumentParser, Namespace, _SubParsersAction
from dataclasses import replace
from logging import getLogger
from pathlib import Path
from time import perf_counter

import numpy as np

from ..config import settings
from ..exceptions import UsageError
from ..io import (
    acceptance_frame,
    draws_frame,
    read_panel,
    write_draws,
    write_table,
)
from ..posterior_analysis import parameter_summary
from ..sampler import (
    CarDegreesOfFreedom,
    ChainConfig,
    PanelDataset,
    PriorConfig,
    SpatialUpdate,
    run_chains,
)
from ..spatial_structure import (
    SpatialGraph,
    build_queen_grid,
    load_adjacency,
    parse_grid,
    spatial_lag,
)
from .constants import (
    ACCEPTANCE_FILE,
    DRAWS_CSV_FILE,
    DRAWS_DIR,
    SUMMARY_FILE,
    Subcommand,
)
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
        Subcommand.FIT.value, parents=[parent], help="run the Gibbs sampler on a panel"
    )
    parser.add_argument("--data", help="panel CSV: region,time,y,x1,...,xK")
    parser.add_argument("--adjacency", help="edge list `i j [weight]`")
    parser.add_argument("--grid", help="queen grid RxC instead of --adjacency")
    parser.add_argument("--iters", type=int, default=20000)
    parser.add_argument("--burnin", type=int, default=10000)
    parser.add_argument("--thin", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--chains", type=int, default=1)
    parser.add_argument("--center-car", action="store_true")
    parser.add_argument(
        "--car-df",
        choices=[mode.value for mode in CarDegreesOfFreedom],
        default=CarDegreesOfFreedom.PANEL.value,
    )
    parser.add_argument(
        "--spatial-update",
        choices=[mode.value for mode in SpatialUpdate],
        default=SpatialUpdate.COLLAPSED.value,
        help="integrate v out of the variance steps, or sweep it region by region",
    )
    parser.add_argument("--mh-scale-alpha", type=float, default=1.0)
    parser.add_argument("--mh-scale-eps", type=float, default=1.0)
    parser.add_argument("--mh-scale-v", type=float, default=1.0)
    parser.add_argument("--log-every", type=int, default=1000)
    parser.add_argument(
        "--spatial-lags",
        action="store_true",
        help="append the raw-weight spatial lag of every regressor",
    )
    parser.add_argument("--draws-csv", action="store_true")
    parser.set_defaults(handler=run_fit, command_parser=parser)


def resolve_graph(args: Namespace, data: PanelDataset) -> SpatialGraph:
    if (args.adjacency is None) == (args.grid is None):
        raise UsageError("pass exactly one of --adjacency and --grid")

    if args.grid is not None:
        return build_queen_grid(*parse_grid(args.grid))

    return load_adjacency(args.adjacency, n_regions=data.n_regions)


def with_spatial_lags(data: PanelDataset, graph: SpatialGraph) -> PanelDataset:
    lags = spatial_lag(graph, data.x)
    names = data.regressor_names + tuple(f"lag_{name}" for name in data.regressor_names)

    return replace(
        data, x=np.concatenate([data.x, lags], axis=2), regressor_names=names
    )


def chain_config(args: Namespace) -> ChainConfig:
    return ChainConfig(
        n_iter=args.iters,
        burn_in=args.burnin,
        thin=args.thin,
        seed=args.seed,
        center_car=args.center_car,
        spatial_update=SpatialUpdate(args.spatial_update),
        car_df=CarDegreesOfFreedom(args.car_df),
        mh_step_scale_alpha=args.mh_scale_alpha,
        mh_step_scale_eps=args.mh_scale_eps,
        mh_step_scale_v=args.mh_scale_v,
        log_every=args.log_every,
    )


@log_command
def run_fit(args: Namespace) -> Path:
    started = perf_counter()
    if args.data is None:
        raise UsageError("fit needs --data")
    if args.chains < 1:
        raise UsageError(f"--chains must be at least 1, got {args.chains}")

    config = chain_config(args)
    prior = PriorConfig()

    data = read_panel(args.data)
    graph = resolve_graph(args, data)
    if args.spatial_lags:
        data = with_spatial_lags(data, graph)

    draws = run_chains(
        data,
        graph,
        prior,
        config,
        n_chains=args.chains,
        max_workers=settings.max_workers,
    )

    outputs = [DRAWS_DIR, SUMMARY_FILE, ACCEPTANCE_FILE]
    directory = output_directory(args, Subcommand.FIT.value)
    with staged_output(directory) as stage:
        write_draws(draws, stage / DRAWS_DIR)
        write_table(parameter_summary(draws), stage / SUMMARY_FILE)
        write_table(acceptance_frame(draws), stage / ACCEPTANCE_FILE)

        if args.draws_csv:
            write_table(draws_frame(draws), stage / DRAWS_CSV_FILE)
            outputs.append(DRAWS_CSV_FILE)

        inputs = {"data": str(args.data)}
        if args.adjacency is not None:
            inputs["adjacency"] = str(args.adjacency)

        write_manifest(
            RunManifest(
                subcommand=Subcommand.FIT.value,
                config={
                    "chain": model_config(config),
                    "prior": model_config(prior),
                    "chains": args.chains,
                    "grid": args.grid,
                    "spatial_lags": args.spatial_lags,
                },
                seed=config.seed,
                inputs=inputs,
                outputs=outputs,
                duration_seconds=perf_counter() - started,
            ),
            stage,
        )

    logger.info(f"Wrote {draws.n_draws} draws to {directory}")
    return directory
