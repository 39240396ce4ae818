from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from math import log
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

from ..exceptions import DataValidationError, InvalidArgumentError
from ..stats_kernels import CompoundSymmetricCov
from ..types import FloatArray, IntArray


class SamplerBlock(Enum):
    __order__ = "BETA U_PLUS ETA_PLUS V SIGMA2_V SIGMA2_U SIGMA2_ETA SIGMA2_ALPHA_EPS"

    BETA = "beta"
    U_PLUS = "u_plus"
    ETA_PLUS = "eta_plus"
    V = "v"
    SIGMA2_V = "sigma2_v"
    SIGMA2_U = "sigma2_u"
    SIGMA2_ETA = "sigma2_eta"
    SIGMA2_ALPHA_EPS = "sigma2_alpha_eps"


class SpatialUpdate(Enum):
    # region-by-region sweep over v, then sigma2_v from its chi2 conditional
    SITE = "site"
    # sigma2_v, sigma2_alpha and sigma2_eps with v integrated out, then v in one block
    COLLAPSED = "collapsed"


class CarDegreesOfFreedom(Enum):
    # chi2(N*T + Nbar_v), T CAR factors in the augmented likelihood
    PANEL = "nt"
    # chi2(N + Nbar_v), one CAR factor per region
    REGIONS = "n"


VARIANCE_NAMES = ("sigma2_alpha", "sigma2_eps", "sigma2_v", "sigma2_u", "sigma2_eta")


@dataclass(frozen=True)
class PanelDataset:
    y: FloatArray
    x: FloatArray
    region_ids: IntArray = field(default=None)  # type: ignore [assignment]
    time_ids: IntArray = field(default=None)  # type: ignore [assignment]
    regressor_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)

        if y.ndim != 2:
            raise DataValidationError(f"y must be N x T, got shape {y.shape}")
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise DataValidationError(
                f"X must be N x T x K matching y {y.shape}, got shape {x.shape}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DataValidationError("panel contains non-finite values")

        n_regions, n_periods, k_regressors = x.shape
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

        if self.region_ids is None:
            object.__setattr__(self, "region_ids", np.arange(n_regions))
        if self.time_ids is None:
            object.__setattr__(self, "time_ids", np.arange(n_periods))
        if not self.regressor_names:
            names = tuple(f"x{k + 1}" for k in range(k_regressors))
            object.__setattr__(self, "regressor_names", names)

        if len(self.regressor_names) != k_regressors:
            raise DataValidationError(
                f"{len(self.regressor_names)} regressor names "
                f"for {k_regressors} columns"
            )

    @property
    def n_regions(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_periods(self) -> int:
        return int(self.y.shape[1])

    @property
    def k_regressors(self) -> int:
        return int(self.x.shape[2])

    @cached_property
    def xtx(self) -> FloatArray:
        """sum over cells of x_it x_it'."""
        flat = self.x.reshape(-1, self.k_regressors)
        return flat.T @ flat

    @cached_property
    def x_sums(self) -> FloatArray:
        """X_i' 1_T for every region, N x K."""
        return self.x.sum(axis=1)

    def fitted(self, beta: FloatArray) -> FloatArray:
        return np.einsum("ntk,k->nt", self.x, beta)

    def permuted(self, order: IntArray) -> "PanelDataset":
        return replace(
            self, y=self.y[order], x=self.x[order], region_ids=self.region_ids[order]
        )


@dataclass
class ParameterState:
    beta: FloatArray
    u_plus: FloatArray
    eta_plus: FloatArray
    v: FloatArray
    sigma2_alpha: float
    sigma2_eps: float
    sigma2_v: float
    sigma2_u: float
    sigma2_eta: float

    def validate(self) -> None:
        if np.any(self.u_plus <= 0) or np.any(self.eta_plus <= 0):
            raise InvalidArgumentError("one-sided errors must be strictly positive")

        for name in VARIANCE_NAMES:
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be strictly positive")

    def covariance(self, t_len: int) -> CompoundSymmetricCov:
        return CompoundSymmetricCov(
            sigma2_eps=self.sigma2_eps, sigma2_alpha=self.sigma2_alpha, t_len=t_len
        )

    def residuals(self, data: PanelDataset) -> FloatArray:
        """y - X beta - (v - eta) 1_T + u, the tau = alpha + eps part."""
        return (
            data.y
            - data.fitted(self.beta)
            + self.u_plus
            + (self.eta_plus - self.v)[:, None]
        )

    def copy(self) -> "ParameterState":
        return replace(
            self,
            beta=self.beta.copy(),
            u_plus=self.u_plus.copy(),
            eta_plus=self.eta_plus.copy(),
            v=self.v.copy(),
        )


class PriorConfig(BaseModel):
    beta_mean: list[float] | None = None
    beta_cov_scale: PositiveFloat = 1000.0

    qbar_eps: PositiveFloat = 1e-4
    qbar_alpha: PositiveFloat = 1e-4
    qbar_v: PositiveFloat = 1e-4

    nbar_eps: PositiveFloat = 1.0
    nbar_alpha: PositiveFloat = 1.0
    nbar_v: PositiveFloat = 1.0

    v0_u: PositiveFloat = 10.0
    v0_eta: PositiveFloat = 10.0

    r_star_u: float = 0.85
    r_star_eta: float = 0.70

    @validator("r_star_u", "r_star_eta")
    def check_median_rate(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"median report rate must lie in (0, 1), got {value}")
        return value

    def beta_prior_mean(self, k_regressors: int) -> FloatArray:
        if self.beta_mean is None:
            return np.zeros(k_regressors)

        if len(self.beta_mean) != k_regressors:
            raise InvalidArgumentError(
                f"beta prior mean has {len(self.beta_mean)} entries, "
                f"model has {k_regressors}"
            )

        return np.asarray(self.beta_mean, dtype=float)

    @property
    def sigma2_u_prior(self) -> tuple[float, float]:
        """IG(v0/2, 2 v0 log^2(r*) / 2) shape and scale."""
        return self.v0_u / 2.0, self.v0_u * log(self.r_star_u) ** 2

    @property
    def sigma2_eta_prior(self) -> tuple[float, float]:
        return self.v0_eta / 2.0, self.v0_eta * log(self.r_star_eta) ** 2


class ChainConfig(BaseModel):
    n_iter: PositiveInt = 20000
    burn_in: NonNegativeInt = 10000
    thin: PositiveInt = 5
    seed: int = 0

    mh_step_scale_alpha: PositiveFloat = 1.0
    mh_step_scale_eps: PositiveFloat = 1.0
    mh_step_scale_v: PositiveFloat = 1.0

    center_car: bool = False
    spatial_update: SpatialUpdate = SpatialUpdate.COLLAPSED
    # only read by the site-by-site update
    car_df: CarDegreesOfFreedom = CarDegreesOfFreedom.PANEL

    fixed_blocks: frozenset[SamplerBlock] = frozenset()
    log_every: PositiveInt = 1000

    @root_validator(skip_on_failure=True)
    def check_burn_in(cls, values: dict[str, Any]) -> dict[str, Any]:
        if values["burn_in"] >= values["n_iter"]:
            raise ValueError(
                f"burn_in ({values['burn_in']}) must be smaller than n_iter "
                f"({values['n_iter']})"
            )
        return values

    @property
    def n_stored(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class ChainDiagnostics:
    chain: int
    n_iter: int
    acceptance_alpha: float
    acceptance_eps: float
    floored: dict[str, int]
    acceptance_v: float = 1.0


@dataclass(frozen=True)
class PosteriorDraws:
    beta: FloatArray
    u_plus: FloatArray
    eta_plus: FloatArray
    v: FloatArray
    sigma2_alpha: FloatArray
    sigma2_eps: FloatArray
    sigma2_v: FloatArray
    sigma2_u: FloatArray
    sigma2_eta: FloatArray
    chain: IntArray
    diagnostics: tuple[ChainDiagnostics, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return int(self.beta.shape[0])

    @property
    def n_regions(self) -> int:
        return int(self.eta_plus.shape[1])

    @property
    def n_periods(self) -> int:
        return int(self.u_plus.shape[2])

    def sigma(self, name: str) -> FloatArray:
        """Standard deviation draws for a variance named like 'sigma2_eta' or 'eta'."""
        key = name if name.startswith("sigma2_") else f"sigma2_{name}"
        return np.sqrt(getattr(self, key))

    @property
    def lambda_stat(self) -> FloatArray:
        """(sigma_eta + sigma_u) / sigma_eps per draw."""
        return (self.sigma("eta") + self.sigma("u")) / self.sigma("eps")

    @property
    def total_one_sided(self) -> FloatArray:
        """eta_i + u_it per draw, S x N x T."""
        return self.eta_plus[:, :, None] + self.u_plus

    def columns(self) -> dict[str, np.ndarray]:
        names = ("beta", "u_plus", "eta_plus", "v", *VARIANCE_NAMES, "chain")
        return {name: getattr(self, name) for name in names}

    @classmethod
    def combine(cls, parts: list["PosteriorDraws"]) -> "PosteriorDraws":
        if not parts:
            raise DataValidationError("no posterior draws to combine")

        stacked = {
            name: np.concatenate([part.columns()[name] for part in parts])
            for name in parts[0].columns()
        }
        diagnostics = tuple(d for part in parts for d in part.diagnostics)

        return cls(**stacked, diagnostics=diagnostics, metadata=dict(parts[0].metadata))
