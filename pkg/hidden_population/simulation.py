"""Data-generating processes for the Monte Carlo studies.

The baseline panel is

    y_it = b1 z_it + b2 sum_j w_ij z_jt + alpha_i + v_i - eta_i - u_it + eps_it

on a queen-contiguity grid, with half-normal one-sided errors and an intrinsic
CAR field drawn on the subspace orthogonal to the constant vector.
"""

from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from typing import Any

import numpy as np
from pydantic import (
    BaseModel,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    root_validator,
    validator,
)

from .exceptions import InvalidArgumentError
from .sampler import PanelDataset
from .spatial_structure import SpatialGraph, build_queen_grid, spatial_lag
from .streams import make_stream
from .types import FloatArray, RandomStream

logger = getLogger("hidden_population")

# eigenvalues of D_w - W below this are treated as the null space of the field
NULL_EIGENVALUE_TOL = 1e-9

# (rows, cols, periods) of the sampling-properties study
BENCHMARK_SAMPLE_SIZES: tuple[tuple[int, int, int], ...] = (
    (7, 7, 5),
    (7, 7, 10),
    (10, 10, 5),
    (10, 10, 10),
    (14, 14, 10),
)


class EpsLaw(Enum):
    __order__ = "NORMAL STUDENT_T"

    NORMAL = "normal"
    STUDENT_T = "student_t"


class ScenarioRescale(Enum):
    __order__ = "NOISE ONE_SIDED SWEEP"

    # hold sigma_eta, sigma_u and solve for sigma_eps
    NOISE = "noise"
    # hold sigma_eps, scale sigma_eta and sigma_u in their current ratio
    ONE_SIDED = "one_sided"
    # sigma_eps = 1 with one-sided sum lambda up to lambda = 1, then one-sided
    # sum 1 with sigma_eps = 1 / lambda
    SWEEP = "sweep"


class DgpConfig(BaseModel):
    rows: PositiveInt = 7
    cols: PositiveInt = 7
    periods: PositiveInt = 5

    beta_true: tuple[float, float] = (0.5, -0.5)

    sigma_alpha: PositiveFloat = 0.1
    sigma_eta: PositiveFloat = 0.5
    sigma_u: PositiveFloat = 0.2
    sigma_eps: PositiveFloat = 0.1
    sigma_v: PositiveFloat = 0.4

    eps_law: EpsLaw = EpsLaw.NORMAL
    student_t_df: PositiveFloat = 4.0

    seed: NonNegativeInt = 0

    @validator("cols")
    def check_grid(cls, value: int, values: dict[str, Any]) -> int:
        if "rows" in values and values["rows"] * value < 2:
            raise ValueError("the grid needs at least two cells")
        return value

    @root_validator(skip_on_failure=True)
    def check_student_t(cls, values: dict[str, Any]) -> dict[str, Any]:
        if values["eps_law"] is EpsLaw.STUDENT_T and values["student_t_df"] <= 2:
            raise ValueError(
                f"student_t errors need df > 2, got {values['student_t_df']}"
            )
        return values

    @property
    def n_regions(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class SimulatedTruth:
    dataset: PanelDataset
    graph: SpatialGraph
    config: DgpConfig
    true_u_plus: FloatArray
    true_eta_plus: FloatArray
    true_v: FloatArray
    true_alpha: FloatArray
    true_eps: FloatArray
    true_P: FloatArray

    @property
    def y_level(self) -> FloatArray:
        """Observed outcome Y = exp(y) on the level scale."""
        return np.exp(self.dataset.y)

    @property
    def n_cells(self) -> int:
        return int(self.dataset.y.size)


def draw_car_field(
    graph: SpatialGraph, sigma_v: float, rng: RandomStream
) -> FloatArray:
    """Zero-sum draw from the intrinsic CAR law with precision (D_w - W) / sigma_v^2."""
    eigenvalues, eigenvectors = np.linalg.eigh(graph.precision_dense())
    proper = eigenvalues > NULL_EIGENVALUE_TOL * eigenvalues.max()

    scores = rng.standard_normal(int(proper.sum())) * sigma_v / np.sqrt(
        eigenvalues[proper]
    )
    field = eigenvectors[:, proper] @ scores

    return field - field.mean()


def _draw_eps(
    config: DgpConfig, size: tuple[int, int], rng: RandomStream
) -> FloatArray:
    if config.eps_law is EpsLaw.STUDENT_T:
        return config.sigma_eps * rng.standard_t(config.student_t_df, size=size)

    return config.sigma_eps * rng.standard_normal(size)


def simulate(config: DgpConfig) -> SimulatedTruth:
    rng = make_stream(config.seed)
    graph = build_queen_grid(config.rows, config.cols)
    shape = (config.n_regions, config.periods)

    z = rng.standard_normal(shape)
    x = np.stack([z, spatial_lag(graph, z)], axis=-1)
    linear = x @ np.asarray(config.beta_true)

    v = draw_car_field(graph, config.sigma_v, rng)
    alpha = config.sigma_alpha * rng.standard_normal(config.n_regions)
    eta_plus = np.abs(config.sigma_eta * rng.standard_normal(config.n_regions))
    u_plus = np.abs(config.sigma_u * rng.standard_normal(shape))
    eps = _draw_eps(config, shape, rng)

    log_hidden = linear + (alpha + v)[:, None] + eps
    y = log_hidden - eta_plus[:, None] - u_plus

    dataset = PanelDataset(y=y, x=x, regressor_names=("z", "lag_z"))
    logger.info(
        f"Simulated {config.rows}x{config.cols} grid over {config.periods} periods "
        f"(seed {config.seed}, {config.eps_law.value} errors, "
        f"lambda={lambda_of(config):.3f})"
    )

    return SimulatedTruth(
        dataset=dataset,
        graph=graph,
        config=config,
        true_u_plus=u_plus,
        true_eta_plus=eta_plus,
        true_v=v,
        true_alpha=alpha,
        true_eps=eps,
        true_P=np.exp(log_hidden),
    )


def lambda_of(config: DgpConfig) -> float:
    """(sigma_eta + sigma_u) / sigma_eps."""
    return (config.sigma_eta + config.sigma_u) / config.sigma_eps


def make_lambda_scenario(
    target_lambda: float,
    base: DgpConfig,
    rescale: ScenarioRescale = ScenarioRescale.NOISE,
) -> DgpConfig:
    if not target_lambda > 0:
        raise InvalidArgumentError(
            f"target lambda must be positive, got {target_lambda}"
        )

    one_sided = base.sigma_eta + base.sigma_u
    eta_share = base.sigma_eta / one_sided

    if rescale is ScenarioRescale.NOISE:
        sigma_eta, sigma_u = base.sigma_eta, base.sigma_u
        sigma_eps = one_sided / target_lambda
    elif rescale is ScenarioRescale.ONE_SIDED:
        sigma_eps = base.sigma_eps
        one_sided = target_lambda * sigma_eps
        sigma_eta, sigma_u = eta_share * one_sided, (1 - eta_share) * one_sided
    else:
        one_sided = min(target_lambda, 1.0)
        sigma_eps = one_sided / target_lambda
        sigma_eta, sigma_u = eta_share * one_sided, (1 - eta_share) * one_sided

    if rescale is not ScenarioRescale.SWEEP:
        sweep_eps = 1.0 if target_lambda <= 1 else 1.0 / target_lambda
        if not np.isclose(sigma_eps, sweep_eps):
            logger.info(
                f"Scenario lambda={target_lambda}: sigma_eps={sigma_eps:.4g} "
                f"differs from the sweep layout value {sweep_eps:.4g}"
            )

    return base.copy(
        update={"sigma_eta": sigma_eta, "sigma_u": sigma_u, "sigma_eps": sigma_eps}
    )
