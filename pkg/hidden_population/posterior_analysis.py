"""Summaries computed from stored posterior draws.

Cellwise quantities are indexed (draw, region, period). Every interval is an
empirical highest density interval over the stored draws.
"""

from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from math import ceil
from typing import Protocol

import numpy as np
import pandas as pd

from .exceptions import (
    DataValidationError,
    InvalidArgumentError,
    UndefinedCorrelationError,
)
from .sampler import PosteriorDraws
from .spatial_structure import MARGINAL_SD_FACTOR, SpatialGraph
from .types import FloatArray, RandomStream

logger = getLogger("hidden_population")

HDI_MIN_DRAWS = 100
SUMMARY_LEVEL = 0.95


class TruthLike(Protocol):
    @property
    def true_P(self) -> FloatArray:
        ...

    @property
    def true_u_plus(self) -> FloatArray:
        ...

    @property
    def true_eta_plus(self) -> FloatArray:
        ...

    @property
    def true_v(self) -> FloatArray:
        ...

    @property
    def y_level(self) -> FloatArray:
        ...


@dataclass(frozen=True)
class TruthPanel:
    """Latent truths as read back from a truth sidecar file."""

    true_P: FloatArray
    true_u_plus: FloatArray
    true_eta_plus: FloatArray
    true_v: FloatArray
    true_alpha: FloatArray

    @property
    def y_level(self) -> FloatArray:
        return self.true_P * np.exp(-(self.true_eta_plus[:, None] + self.true_u_plus))


class CellGrouping(Enum):
    __order__ = "CELL REGION PERIOD"

    CELL = "cell"
    REGION = "region"
    PERIOD = "period"


@dataclass(frozen=True)
class HiddenPopulationInterval:
    region: int
    time: int
    point_estimate: float
    hdi_lower: float
    hdi_upper: float
    alpha_level: float


@dataclass(frozen=True)
class IntervalTable:
    """Point estimates and HDIs of P for every cell, each N x T."""

    point_estimate: FloatArray
    hdi_lower: FloatArray
    hdi_upper: FloatArray
    level: float

    def cell(self, region: int, time: int) -> HiddenPopulationInterval:
        return HiddenPopulationInterval(
            region=region,
            time=time,
            point_estimate=float(self.point_estimate[region, time]),
            hdi_lower=float(self.hdi_lower[region, time]),
            hdi_upper=float(self.hdi_upper[region, time]),
            alpha_level=1.0 - self.level,
        )

    def covers(self, values: FloatArray) -> FloatArray:
        return (self.hdi_lower <= values) & (values <= self.hdi_upper)


@dataclass(frozen=True)
class CoverageReport:
    nominal_level: float
    posterior_mean_coverage: float
    coverage_hdi: tuple[float, float]
    a: float
    b: float
    n_covered: int
    n_cells: int


@dataclass(frozen=True)
class MapeSummary:
    average: float
    median: float
    hdi_pair: tuple[float, float]
    n_cells: int
    n_excluded: int


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    median: float
    hdi_lower: float
    hdi_upper: float


@dataclass(frozen=True)
class UncapturedSummary:
    permanent_pct: float
    total_pct: float
    lambda_stat: float
    spatial_share: float


def hdi_bounds(
    values: FloatArray, level: float, axis: int = 0, min_size: int = HDI_MIN_DRAWS
) -> tuple[FloatArray, FloatArray]:
    """Shortest window over sorted draws along `axis` holding ceil(level * S) points.

    Ties go to the window with the smallest lower endpoint.
    """
    if not 0 < level < 1:
        raise InvalidArgumentError(f"level must lie in (0, 1), got {level}")

    ordered = np.sort(np.moveaxis(np.asarray(values, dtype=float), axis, 0), axis=0)
    n_draws = ordered.shape[0]
    if n_draws < max(min_size, 2):
        raise DataValidationError(
            f"an HDI needs at least {max(min_size, 2)} draws, got {n_draws}"
        )

    # absorb float error in level * S, e.g. 0.07 * 100
    span = min(ceil(level * n_draws - 1e-9), n_draws - 1)
    widths = ordered[span:] - ordered[: n_draws - span]
    start = np.argmin(widths, axis=0)[None, ...]

    lower = np.take_along_axis(ordered, start, axis=0)[0]
    upper = np.take_along_axis(ordered, start + span, axis=0)[0]

    return lower, upper


def hdi(
    draws: FloatArray, level: float, min_size: int = HDI_MIN_DRAWS
) -> tuple[float, float]:
    draws = np.asarray(draws, dtype=float).ravel()
    lower, upper = hdi_bounds(draws, level, min_size=min_size)

    return float(lower), float(upper)


def summarize(
    values: FloatArray, level: float = SUMMARY_LEVEL, min_size: int = HDI_MIN_DRAWS
) -> PosteriorSummary:
    lower, upper = hdi(values, level, min_size=min_size)
    return PosteriorSummary(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        hdi_lower=lower,
        hdi_upper=upper,
    )


def _check_level_panel(draws: PosteriorDraws, y_observed: FloatArray) -> FloatArray:
    y_observed = np.asarray(y_observed, dtype=float)
    if y_observed.shape != (draws.n_regions, draws.n_periods):
        raise DataValidationError(
            f"observed panel {y_observed.shape} does not match draws "
            f"({draws.n_regions}, {draws.n_periods})"
        )
    if np.any(y_observed < 0):
        raise InvalidArgumentError("observed level-scale values must be non-negative")

    return y_observed


def hidden_population_draws(
    draws: PosteriorDraws, y_observed: FloatArray
) -> FloatArray:
    """Y_it exp(eta_i + u_it) for every draw, S x N x T."""
    y_observed = _check_level_panel(draws, y_observed)
    return y_observed[None, :, :] * np.exp(draws.total_one_sided)


def hidden_population_interval(
    draws: PosteriorDraws, y_observed: FloatArray, region: int, time: int, level: float
) -> HiddenPopulationInterval:
    y_observed = _check_level_panel(draws, y_observed)
    values = y_observed[region, time] * np.exp(
        draws.eta_plus[:, region] + draws.u_plus[:, region, time]
    )
    lower, upper = hdi(values, level)

    return HiddenPopulationInterval(
        region=region,
        time=time,
        point_estimate=float(values.mean()),
        hdi_lower=lower,
        hdi_upper=upper,
        alpha_level=1.0 - level,
    )


def hidden_population_intervals(
    draws: PosteriorDraws, y_observed: FloatArray, level: float
) -> IntervalTable:
    values = hidden_population_draws(draws, y_observed)
    lower, upper = hdi_bounds(values, level)

    return IntervalTable(
        point_estimate=values.mean(axis=0),
        hdi_lower=lower,
        hdi_upper=upper,
        level=level,
    )


def coverage_report(
    intervals: IntervalTable,
    truth: TruthLike,
    level: float,
    n_beta_draws: int,
    rng: RandomStream,
) -> CoverageReport:
    """Beta-Binomial posterior of the share of cells whose true P is covered."""
    true_P = np.asarray(truth.true_P, dtype=float)
    if true_P.shape != intervals.hdi_lower.shape:
        raise DataValidationError(
            f"truth {true_P.shape} does not match intervals {intervals.hdi_lower.shape}"
        )

    n_cells = int(true_P.size)
    n_covered = int(intervals.covers(true_P).sum())
    a, b = 1.0 + n_covered, 1.0 + n_cells - n_covered

    coverage = rng.beta(a, b, size=n_beta_draws)
    lower, upper = hdi(coverage, SUMMARY_LEVEL)

    logger.debug(
        f"Coverage at {level}: {n_covered}/{n_cells} cells, Beta({a:g}, {b:g})"
    )

    return CoverageReport(
        nominal_level=level,
        posterior_mean_coverage=float(coverage.mean()),
        coverage_hdi=(lower, upper),
        a=a,
        b=b,
        n_covered=n_covered,
        n_cells=n_cells,
    )


def mape_summary(
    draws: PosteriorDraws, truth: TruthLike, per_draw: bool = False
) -> MapeSummary:
    """Cellwise absolute percentage error of the hidden-population estimate.

    By default the error of the posterior-mean point estimate; with per_draw the
    error of every draw, averaged over draws.
    """
    true_P = np.asarray(truth.true_P, dtype=float)
    values = hidden_population_draws(draws, truth.y_level)

    valid = true_P != 0
    if n_excluded := int((~valid).sum()):
        logger.warning(f"Excluded {n_excluded} cells with zero true P from MAPE")
    if not valid.any():
        raise DataValidationError("every true P is zero, MAPE is undefined")

    if per_draw:
        errors = np.abs((true_P - values) / np.where(valid, true_P, 1.0)).mean(axis=0)
    else:
        errors = np.abs((true_P - values.mean(axis=0)) / np.where(valid, true_P, 1.0))

    cell_errors = errors[valid]
    lower, upper = hdi(cell_errors, SUMMARY_LEVEL, min_size=2)

    return MapeSummary(
        average=float(cell_errors.mean()),
        median=float(np.median(cell_errors)),
        hdi_pair=(lower, upper),
        n_cells=int(cell_errors.size),
        n_excluded=n_excluded,
    )


def rho_hat(draw_matrix: FloatArray, truth: FloatArray) -> float:
    """Pearson correlation of each draw with the truth, averaged over draws."""
    truth = np.asarray(truth, dtype=float).ravel()
    draw_matrix = np.asarray(draw_matrix, dtype=float).reshape(-1, truth.size)

    truth_centered = truth - truth.mean()
    truth_norm = np.linalg.norm(truth_centered)
    if truth_norm == 0:
        raise UndefinedCorrelationError("truth vector has zero variance")

    centered = draw_matrix - draw_matrix.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    if np.any(norms == 0):
        raise UndefinedCorrelationError(
            f"{int((norms == 0).sum())} draws have zero variance"
        )

    rho = (centered @ truth_centered) / (norms * truth_norm)
    return float(np.clip(rho, -1.0, 1.0).mean())


def _average_row_sum(draws: PosteriorDraws, graph: SpatialGraph | None) -> float:
    if graph is not None:
        return graph.average_row_sum
    if "average_row_sum" in draws.metadata:
        return float(draws.metadata["average_row_sum"])

    raise DataValidationError("the spatial share needs the graph the draws were fit on")


def uncaptured_summaries(
    draws: PosteriorDraws, graph: SpatialGraph | None = None
) -> UncapturedSummary:
    if draws.n_draws == 0:
        raise DataValidationError("no posterior draws")

    marginal_sd = draws.sigma("v") / (
        MARGINAL_SD_FACTOR * _average_row_sum(draws, graph)
    )
    total_sd = (
        marginal_sd
        + draws.sigma("alpha")
        + draws.sigma("eps")
        + draws.sigma("eta")
        + draws.sigma("u")
    )

    return UncapturedSummary(
        permanent_pct=float(np.mean(1.0 - np.exp(-draws.eta_plus))),
        total_pct=float(np.mean(1.0 - np.exp(-draws.total_one_sided))),
        lambda_stat=float(np.mean(draws.lambda_stat)),
        spatial_share=float(np.mean(marginal_sd / total_sd)),
    )


def _region_ids(draws: PosteriorDraws) -> np.ndarray:
    return np.asarray(draws.metadata.get("region_ids", np.arange(draws.n_regions)))


def _time_ids(draws: PosteriorDraws) -> np.ndarray:
    return np.asarray(draws.metadata.get("time_ids", np.arange(draws.n_periods)))


def uncaptured_by_cell(
    draws: PosteriorDraws, group: CellGrouping = CellGrouping.CELL
) -> pd.DataFrame:
    """Posterior mean of 1 - exp(-(eta + u)) per cell, region or period."""
    pct = np.mean(1.0 - np.exp(-draws.total_one_sided), axis=0)
    regions, times = _region_ids(draws), _time_ids(draws)

    if group is CellGrouping.REGION:
        return pd.DataFrame({"region": regions, "pct": pct.mean(axis=1)})
    if group is CellGrouping.PERIOD:
        return pd.DataFrame({"time": times, "pct": pct.mean(axis=0)})

    return pd.DataFrame(
        {
            "region": np.repeat(regions, draws.n_periods),
            "time": np.tile(times, draws.n_regions),
            "pct": pct.ravel(),
        }
    )


def lambda_summary(
    draws: PosteriorDraws, level: float = SUMMARY_LEVEL
) -> PosteriorSummary:
    return summarize(draws.lambda_stat, level)


def parameter_summary(
    draws: PosteriorDraws,
    regressor_names: tuple[str, ...] | None = None,
    level: float = SUMMARY_LEVEL,
) -> pd.DataFrame:
    """Posterior mean, median and HDI of beta, the error scales and lambda."""
    names = regressor_names or tuple(
        draws.metadata.get("regressor_names")
        or (f"beta_{k + 1}" for k in range(draws.beta.shape[1]))
    )

    columns: dict[str, FloatArray] = {
        name: draws.beta[:, k] for k, name in enumerate(names)
    }
    for component in ("eta", "u", "v", "alpha", "eps"):
        columns[f"sigma_{component}"] = draws.sigma(component)
    columns["lambda"] = draws.lambda_stat

    rows = []
    for parameter, values in columns.items():
        summary = summarize(values, level)
        rows.append(
            {
                "parameter": parameter,
                "mean": summary.mean,
                "median": summary.median,
                "hdi_lower": summary.hdi_lower,
                "hdi_upper": summary.hdi_upper,
            }
        )

    return pd.DataFrame(rows)


def latent_summary(draws: PosteriorDraws, truth: TruthLike) -> pd.DataFrame:
    """Simulated against estimated -eta, -u and v, with the draw-truth correlation."""
    components = (
        ("eta_plus", -np.asarray(truth.true_eta_plus), -draws.eta_plus),
        ("u_plus", -np.asarray(truth.true_u_plus), -draws.u_plus),
        ("v", np.asarray(truth.true_v), draws.v),
    )

    rows = []
    for name, population, posterior in components:
        estimate = posterior.mean(axis=0)
        rows.append(
            {
                "component": name,
                "population_mean": float(population.mean()),
                "population_median": float(np.median(population)),
                "posterior_mean": float(estimate.mean()),
                "posterior_median": float(np.median(estimate)),
                "rho_hat": rho_hat(posterior.reshape(draws.n_draws, -1), population),
            }
        )

    return pd.DataFrame(rows)
