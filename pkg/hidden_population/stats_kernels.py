"""Probability kernels shared by every sampler update.

Only what the Gibbs sweep needs lives here: truncated normal draws, inverse
gamma and scaled inverse chi-squared draws, the compound-symmetric panel
covariance with its closed-form inverse, and the univariate reduction of a
multivariate normal.
"""

from dataclasses import dataclass
from math import isfinite, log

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr, ndtri

from .exceptions import InvalidArgumentError, NumericalError
from .types import FloatArray, RandomStream

# standardized lower bound above which the exponential-rejection tail sampler
# replaces inverse-CDF
TAIL_SWITCH = 4.0


@dataclass(frozen=True)
class CompoundSymmetricCov:
    """Sigma = sigma2_eps * I_T + sigma2_alpha * 1 1'."""

    sigma2_eps: float
    sigma2_alpha: float
    t_len: int

    def __post_init__(self) -> None:
        if not isfinite(self.sigma2_eps) or self.sigma2_eps <= 0:
            raise InvalidArgumentError(
                f"sigma2_eps must be positive, got {self.sigma2_eps}"
            )
        if not isfinite(self.sigma2_alpha) or self.sigma2_alpha < 0:
            raise InvalidArgumentError(
                f"sigma2_alpha must be non-negative, got {self.sigma2_alpha}"
            )
        if self.t_len < 1:
            raise InvalidArgumentError(f"t_len must be >= 1, got {self.t_len}")

    @property
    def total(self) -> float:
        return self.sigma2_eps + self.t_len * self.sigma2_alpha

    @property
    def shrinkage(self) -> float:
        return self.sigma2_alpha / self.total

    @property
    def logdet(self) -> float:
        return (self.t_len - 1) * log(self.sigma2_eps) + log(self.total)

    @property
    def ones_quadratic(self) -> float:
        """1' Sigma^-1 1."""
        return self.t_len / self.total

    def apply_inverse(self, x: FloatArray) -> FloatArray:
        """Sigma^-1 x along the last axis."""
        x = np.asarray(x, dtype=float)
        return (x - self.shrinkage * x.sum(axis=-1, keepdims=True)) / self.sigma2_eps

    def quadratic(self, x: FloatArray, y: FloatArray | None = None) -> FloatArray:
        """x' Sigma^-1 y along the last axis, without forming Sigma^-1."""
        x = np.asarray(x, dtype=float)
        y = x if y is None else np.asarray(y, dtype=float)

        cross = (x * y).sum(axis=-1)
        sums = x.sum(axis=-1) * y.sum(axis=-1)
        return (cross - self.shrinkage * sums) / self.sigma2_eps

    def dense(self) -> FloatArray:
        return self.sigma2_eps * np.eye(self.t_len) + self.sigma2_alpha

    def dense_inverse(self) -> FloatArray:
        return (np.eye(self.t_len) - self.shrinkage) / self.sigma2_eps


def sigma_inverse(cov: CompoundSymmetricCov) -> FloatArray:
    return cov.dense_inverse()


@dataclass(frozen=True)
class TruncatedNormalSpec:
    mean: float
    variance: float
    lower_bound: float = 0.0

    def __post_init__(self) -> None:
        if not (isfinite(self.mean) and isfinite(self.variance)):
            raise InvalidArgumentError(
                f"mean and variance must be finite, got {self.mean}, {self.variance}"
            )
        if self.variance <= 0:
            raise InvalidArgumentError(
                f"variance must be positive, got {self.variance}"
            )
        if not isfinite(self.lower_bound):
            raise InvalidArgumentError("lower_bound must be finite")


def _exponential_tail(bound: FloatArray, rng: RandomStream) -> FloatArray:
    # Robert (1995) translated-exponential rejection for Z | Z > bound
    rate = (bound + np.sqrt(bound * bound + 4.0)) / 2.0
    out = np.empty_like(bound)
    pending = np.arange(bound.size)

    while pending.size:
        proposal = bound[pending] + rng.exponential(size=pending.size) / rate[pending]
        accept = rng.random(pending.size) <= np.exp(
            -0.5 * (proposal - rate[pending]) ** 2
        )
        out[pending[accept]] = proposal[accept]
        pending = pending[~accept]

    return out


def truncated_normal(
    mean: FloatArray | float,
    variance: FloatArray | float,
    rng: RandomStream,
    lower_bound: float = 0.0,
) -> FloatArray:
    """Vectorized draws of N(mean, variance) conditioned on exceeding lower_bound."""
    mean_arr = np.atleast_1d(np.asarray(mean, dtype=float))
    variance_arr = np.broadcast_to(np.asarray(variance, dtype=float), mean_arr.shape)

    if not (np.all(np.isfinite(mean_arr)) and np.all(np.isfinite(variance_arr))):
        raise InvalidArgumentError("truncated normal mean and variance must be finite")
    if np.any(variance_arr <= 0):
        raise InvalidArgumentError("truncated normal variance must be positive")

    sd = np.sqrt(variance_arr)
    bound = ((lower_bound - mean_arr) / sd).ravel()

    z = np.empty_like(bound)
    central = bound <= TAIL_SWITCH
    n_central = int(central.sum())

    if n_central:
        # uniform on (0, 1] so the inverse CDF never returns +inf
        uniform = 1.0 - rng.random(n_central)
        z[central] = -ndtri(uniform * ndtr(-bound[central]))
    if n_central < bound.size:
        z[~central] = _exponential_tail(bound[~central], rng)

    draws = mean_arr + sd * z.reshape(mean_arr.shape)
    draws = np.maximum(draws, np.nextafter(lower_bound, np.inf))

    return draws.reshape(np.shape(mean)) if np.ndim(mean) else draws


def sample_truncated_normal(spec: TruncatedNormalSpec, rng: RandomStream) -> float:
    return float(
        truncated_normal(spec.mean, spec.variance, rng, lower_bound=spec.lower_bound)[0]
    )


def conditional_weights(cov: FloatArray, index: int) -> tuple[FloatArray, float]:
    """Weights Omega_12 Omega_22^-1 and the Schur complement for one coordinate."""
    cov = np.asarray(cov, dtype=float)
    size = cov.shape[0]

    if cov.ndim != 2 or cov.shape != (size, size):
        raise InvalidArgumentError(f"covariance must be square, got shape {cov.shape}")
    if not 0 <= index < size:
        raise InvalidArgumentError(f"index {index} outside [0, {size})")

    if size == 1:
        return np.empty(0), float(cov[0, 0])

    others = np.delete(np.arange(size), index)
    omega_12 = cov[index, others]
    omega_22 = cov[np.ix_(others, others)]

    try:
        factor = cho_factor(omega_22)
    except LinAlgError as exc:
        raise NumericalError(
            f"conditioning block for coordinate {index} is not positive definite",
            condition=float(np.linalg.cond(omega_22)),
        ) from exc

    weights = cho_solve(factor, omega_12)
    cond_var = float(cov[index, index] - omega_12 @ weights)

    if cond_var <= 0:
        raise NumericalError(
            f"non-positive conditional variance {cond_var} for coordinate {index}",
            condition=float(np.linalg.cond(omega_22)),
        )

    return weights, cond_var


def conditional_mvn(
    mean: FloatArray, cov: FloatArray, index: int, others: FloatArray
) -> tuple[float, float]:
    mean = np.asarray(mean, dtype=float)
    others = np.asarray(others, dtype=float)
    cov = np.asarray(cov, dtype=float)

    if not np.allclose(cov, cov.T):
        raise InvalidArgumentError("covariance must be symmetric")
    if others.shape != (mean.size - 1,):
        raise InvalidArgumentError(
            f"expected {mean.size - 1} conditioning values, got {others.shape}"
        )

    weights, cond_var = conditional_weights(cov, index)
    rest = np.delete(mean, index)

    return float(mean[index] + weights @ (others - rest)), cond_var


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not isfinite(value) or value <= 0:
            raise InvalidArgumentError(f"{name} must be positive, got {value}")


def sample_inverse_gamma(
    shape: float, scale: float, rng: RandomStream, size: int | None = None
) -> float | FloatArray:
    """Density proportional to x^(-shape-1) exp(-scale / x)."""
    _check_positive(shape=shape, scale=scale)

    return scale / rng.gamma(shape, 1.0, size=size)


def sample_scaled_inverse_chi2(
    scale_sum: float, df: float, rng: RandomStream, size: int | None = None
) -> float | FloatArray:
    """Draw sigma2 such that scale_sum / sigma2 ~ chi2(df)."""
    _check_positive(scale_sum=scale_sum, df=df)

    return scale_sum / rng.chisquare(df, size=size)


def scaled_inverse_chi2_logpdf(x: float, qbar: float, nbar: float) -> float:
    """Unnormalized log prior of sigma2 when qbar / sigma2 ~ chi2(nbar)."""
    if x <= 0:
        return -np.inf

    return -(nbar / 2.0 + 1.0) * log(x) - qbar / (2.0 * x)
