from concurrent.futures import ThreadPoolExecutor
from logging import getLogger
from math import log, pi, sqrt

import numpy as np

from ..config import settings
from ..exceptions import DataValidationError, NumericalError
from ..spatial_structure import SpatialGraph
from ..streams import make_stream, split_streams
from ..types import RandomStream
from .models import (
    VARIANCE_NAMES,
    ChainConfig,
    ChainDiagnostics,
    PanelDataset,
    ParameterState,
    PosteriorDraws,
    PriorConfig,
    SamplerBlock,
    SpatialUpdate,
)
from .updates import (
    update_beta,
    update_eta_plus,
    update_sigma2_alpha_eps_mh,
    update_sigma2_eta,
    update_sigma2_u,
    update_sigma2_v,
    update_u_plus,
    update_v,
    update_v_block,
    update_variances_collapsed,
)

logger = getLogger("hidden_population")

VARIANCE_FLOOR = 1e-12
MIN_START_VARIANCE = 1e-4


def initial_state(
    data: PanelDataset, prior: PriorConfig, graph: SpatialGraph | None = None
) -> ParameterState:
    """Pooled least squares for beta, prior medians for the one-sided scales.

    Region means of the least-squares residuals set the region-level scales.
    With a graph, their neighbour average starts v and the remainder sets
    sigma2_alpha.
    """
    flat_x = data.x.reshape(-1, data.k_regressors)
    beta, *_ = np.linalg.lstsq(flat_x, data.y.ravel(), rcond=None)

    resid = data.y - data.fitted(beta)
    region_means = resid.mean(axis=1)
    centered = region_means - region_means.mean()
    within_var = max(float(np.var(resid - region_means[:, None])), MIN_START_VARIANCE)

    v = np.zeros(data.n_regions)
    sigma2_v = max(float(np.var(centered)), MIN_START_VARIANCE)
    if graph is not None:
        v = graph.weights @ centered / graph.row_sums
        v -= v.mean()
        sigma2_v *= graph.average_row_sum

    sigma2_u = log(prior.r_star_u) ** 2
    sigma2_eta = log(prior.r_star_eta) ** 2

    return ParameterState(
        beta=beta,
        u_plus=np.full(data.y.shape, sqrt(2.0 * sigma2_u / pi)),
        eta_plus=np.full(data.n_regions, sqrt(2.0 * sigma2_eta / pi)),
        v=v,
        sigma2_alpha=max(float(np.var(centered - v)) / 4.0, MIN_START_VARIANCE),
        sigma2_eps=within_var / 2.0,
        sigma2_v=sigma2_v,
        sigma2_u=sigma2_u,
        sigma2_eta=sigma2_eta,
    )


class _Sweeper:
    def __init__(
        self,
        data: PanelDataset,
        graph: SpatialGraph,
        prior: PriorConfig,
        config: ChainConfig,
        rng: RandomStream,
    ) -> None:
        self.data = data
        self.graph = graph
        self.prior = prior
        self.config = config
        self.rng = rng

        # a fixed v cannot be integrated out
        self.collapsed = (
            config.spatial_update is SpatialUpdate.COLLAPSED
            and SamplerBlock.V not in config.fixed_blocks
        )

        self.floored = {name: 0 for name in VARIANCE_NAMES}
        self.accepted_alpha = 0
        self.accepted_eps = 0
        self.accepted_v = 0

    def _floor(self, name: str, value: float) -> float:
        if value < VARIANCE_FLOOR:
            self.floored[name] += 1
            logger.debug(f"Floored {name}={value:.3e} to {VARIANCE_FLOOR}")
            return VARIANCE_FLOOR

        return value

    def sweep(self, state: ParameterState) -> None:
        data, prior, rng = self.data, self.prior, self.rng
        fixed = self.config.fixed_blocks

        if SamplerBlock.BETA not in fixed:
            state.beta = update_beta(state, data, prior, rng)
        if SamplerBlock.U_PLUS not in fixed:
            state.u_plus = update_u_plus(state, data, rng)
        if SamplerBlock.ETA_PLUS not in fixed:
            state.eta_plus = update_eta_plus(state, data, rng)

        if self.collapsed:
            self._spatial_collapsed(state)
        else:
            self._spatial_site(state)

        if SamplerBlock.SIGMA2_U not in fixed:
            state.sigma2_u = self._floor("sigma2_u", update_sigma2_u(state, prior, rng))
        if SamplerBlock.SIGMA2_ETA not in fixed:
            state.sigma2_eta = self._floor(
                "sigma2_eta", update_sigma2_eta(state, prior, rng)
            )

        if not self.collapsed and SamplerBlock.SIGMA2_ALPHA_EPS not in fixed:
            self._alpha_eps_given_v(state)

    def _spatial_site(self, state: ParameterState) -> None:
        data, graph, prior, rng = self.data, self.graph, self.prior, self.rng
        fixed = self.config.fixed_blocks

        if SamplerBlock.V not in fixed:
            state.v = update_v(state, data, graph, rng, center=self.config.center_car)
        if SamplerBlock.SIGMA2_V not in fixed:
            state.sigma2_v = self._floor(
                "sigma2_v",
                update_sigma2_v(state, data, graph, prior, rng, self.config.car_df),
            )

    def _spatial_collapsed(self, state: ParameterState) -> None:
        config, fixed = self.config, self.config.fixed_blocks

        sigma2_v, sigma2_alpha, sigma2_eps, accepted = update_variances_collapsed(
            state,
            self.data,
            self.graph,
            self.prior,
            self.rng,
            step_scales=(
                config.mh_step_scale_v,
                config.mh_step_scale_alpha,
                config.mh_step_scale_eps,
            ),
            sample_sigma2_v=SamplerBlock.SIGMA2_V not in fixed,
            sample_alpha_eps=SamplerBlock.SIGMA2_ALPHA_EPS not in fixed,
        )
        state.sigma2_v = self._floor("sigma2_v", sigma2_v)
        state.sigma2_alpha = self._floor("sigma2_alpha", sigma2_alpha)
        state.sigma2_eps = self._floor("sigma2_eps", sigma2_eps)
        self.accepted_v += accepted[0]
        self.accepted_alpha += accepted[1]
        self.accepted_eps += accepted[2]

        state.v = update_v_block(
            state, self.data, self.graph, self.rng, center=config.center_car
        )

    def _alpha_eps_given_v(self, state: ParameterState) -> None:
        sigma2_alpha, sigma2_eps, accepted = update_sigma2_alpha_eps_mh(
            state,
            self.data,
            self.prior,
            self.rng,
            step_scale_alpha=self.config.mh_step_scale_alpha,
            step_scale_eps=self.config.mh_step_scale_eps,
        )
        state.sigma2_alpha = self._floor("sigma2_alpha", sigma2_alpha)
        state.sigma2_eps = self._floor("sigma2_eps", sigma2_eps)
        self.accepted_alpha += accepted[0]
        self.accepted_eps += accepted[1]

    def acceptance_summary(self, iteration: int) -> str:
        summary = (
            f"acceptance alpha={self.accepted_alpha / iteration:.2f} "
            f"eps={self.accepted_eps / iteration:.2f}"
        )
        if self.collapsed:
            summary += f" sigma2_v={self.accepted_v / iteration:.2f}"

        return summary

    def diagnostics(self, chain_index: int) -> ChainDiagnostics:
        n_iter = self.config.n_iter

        return ChainDiagnostics(
            chain=chain_index,
            n_iter=n_iter,
            acceptance_alpha=self.accepted_alpha / n_iter,
            acceptance_eps=self.accepted_eps / n_iter,
            floored=dict(self.floored),
            acceptance_v=self.accepted_v / n_iter if self.collapsed else 1.0,
        )


def run_chain(
    data: PanelDataset,
    graph: SpatialGraph,
    prior: PriorConfig,
    chain_config: ChainConfig,
    rng: RandomStream | None = None,
    initial: ParameterState | None = None,
    chain_index: int = 0,
) -> PosteriorDraws:
    if graph.n_regions != data.n_regions:
        raise DataValidationError(
            f"panel has {data.n_regions} regions but the graph has {graph.n_regions}"
        )

    rng = make_stream(chain_config.seed) if rng is None else rng
    state = (initial_state(data, prior, graph) if initial is None else initial).copy()
    state.validate()

    n_stored = chain_config.n_stored
    n_regions, n_periods = data.y.shape
    store = {
        "beta": np.empty((n_stored, data.k_regressors)),
        "u_plus": np.empty((n_stored, n_regions, n_periods)),
        "eta_plus": np.empty((n_stored, n_regions)),
        "v": np.empty((n_stored, n_regions)),
        **{name: np.empty(n_stored) for name in VARIANCE_NAMES},
    }

    sweeper = _Sweeper(data, graph, prior, chain_config, rng)
    slot = 0

    logger.info(
        f"Chain {chain_index}: {chain_config.n_iter} iterations, burn-in "
        f"{chain_config.burn_in}, thin {chain_config.thin}, "
        f"N={n_regions}, T={n_periods}, K={data.k_regressors}"
    )

    for iteration in range(1, chain_config.n_iter + 1):
        try:
            sweeper.sweep(state)
        except NumericalError as exc:
            raise NumericalError(
                exc.detail, condition=exc.condition, iteration=iteration
            ) from exc

        past_burn_in = iteration - chain_config.burn_in
        if past_burn_in > 0 and past_burn_in % chain_config.thin == 0:
            for name, array in store.items():
                array[slot] = getattr(state, name)
            slot += 1

        if iteration % chain_config.log_every == 0:
            logger.info(
                f"Chain {chain_index}: iteration {iteration}/{chain_config.n_iter}, "
                f"beta={np.round(state.beta, 3).tolist()}, "
                f"{sweeper.acceptance_summary(iteration)}"
            )

    diagnostics = sweeper.diagnostics(chain_index)

    if floored := {name: count for name, count in sweeper.floored.items() if count}:
        logger.warning(f"Chain {chain_index}: floored variance draws {floored}")

    return PosteriorDraws(
        **store,
        chain=np.full(n_stored, chain_index, dtype=np.int64),
        diagnostics=(diagnostics,),
        metadata={
            "seed": chain_config.seed,
            "chain_config": chain_config.json(),
            "region_ids": data.region_ids.tolist(),
            "time_ids": data.time_ids.tolist(),
            "regressor_names": list(data.regressor_names),
            "average_row_sum": graph.average_row_sum,
        },
    )


def run_chains(
    data: PanelDataset,
    graph: SpatialGraph,
    prior: PriorConfig,
    chain_config: ChainConfig,
    n_chains: int = 1,
    max_workers: int | None = None,
) -> PosteriorDraws:
    """Independent chains on child streams split from the master seed."""
    if n_chains == 1:
        return run_chain(data, graph, prior, chain_config)

    streams = split_streams(chain_config.seed, n_chains)
    workers = min(n_chains, max_workers or settings.max_workers)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(
                run_chain,
                data,
                graph,
                prior,
                chain_config,
                rng=stream,
                chain_index=index,
            )
            for index, stream in enumerate(streams)
        ]
        parts = [future.result() for future in futures]

    return PosteriorDraws.combine(parts)
