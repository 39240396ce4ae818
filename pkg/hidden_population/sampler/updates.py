"""Full conditional updates of the spatial frontier panel model.

Every update takes the current state and returns the new value of one block;
the chain loop in chain.py writes it back. alpha_i never appears: it is
integrated out through the compound-symmetric Sigma.
"""

from dataclasses import dataclass
from math import isfinite, log, pi
from typing import Callable

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import chi2

from ..exceptions import NumericalError
from ..spatial_structure import CarSpectrum, SpatialGraph, car_quadratic_form
from ..stats_kernels import (
    CompoundSymmetricCov,
    conditional_weights,
    sample_inverse_gamma,
    sample_scaled_inverse_chi2,
    scaled_inverse_chi2_logpdf,
    truncated_normal,
)
from ..types import FloatArray, RandomStream
from .models import CarDegreesOfFreedom, PanelDataset, ParameterState, PriorConfig

# median of chi2(1); the MH proposal is centred on the current value
CHI2_1_MEDIAN = float(chi2.median(1))

LogDensity = Callable[[float], float]


def beta_conditional(
    state: ParameterState, data: PanelDataset, prior: PriorConfig
) -> tuple[FloatArray, FloatArray]:
    """Mean and lower Cholesky factor of the posterior precision of beta."""
    cov = state.covariance(data.n_periods)
    k_regressors = data.k_regressors

    # y = X beta + v - eta - u + tau
    y_tilde = data.y + state.u_plus + (state.eta_plus - state.v)[:, None]
    x_sums = data.x_sums

    # sum_i X_i' Sigma^-1 X_i and sum_i X_i' Sigma^-1 y_i via the rank-one inverse
    precision = (data.xtx - cov.shrinkage * x_sums.T @ x_sums) / cov.sigma2_eps
    rhs = (
        np.einsum("ntk,nt->k", data.x, y_tilde)
        - cov.shrinkage * x_sums.T @ y_tilde.sum(axis=1)
    ) / cov.sigma2_eps

    prior_precision = np.eye(k_regressors) / prior.beta_cov_scale
    precision += prior_precision
    rhs += prior_precision @ prior.beta_prior_mean(k_regressors)

    try:
        lower = cholesky(precision, lower=True)
    except LinAlgError as exc:
        raise NumericalError(
            "posterior precision of beta is not positive definite",
            condition=float(np.linalg.cond(precision)),
        ) from exc

    return cho_solve((lower, True), rhs), lower


def update_beta(
    state: ParameterState, data: PanelDataset, prior: PriorConfig, rng: RandomStream
) -> FloatArray:
    mean, lower = beta_conditional(state, data, prior)
    noise = rng.standard_normal(mean.size)

    return mean + solve_triangular(lower, noise, lower=True, trans="T")


def u_plus_covariance(cov: CompoundSymmetricCov, sigma2_u: float) -> FloatArray:
    """Omega = (Sigma^-1 + I / sigma2_u)^-1, itself compound symmetric."""
    diagonal = 1.0 / cov.sigma2_eps + 1.0 / sigma2_u
    off_diagonal = cov.shrinkage / cov.sigma2_eps
    denominator = diagonal - cov.t_len * off_diagonal

    return (np.eye(cov.t_len) + off_diagonal / denominator) / diagonal


def update_u_plus(
    state: ParameterState, data: PanelDataset, rng: RandomStream
) -> FloatArray:
    cov = state.covariance(data.n_periods)
    omega = u_plus_covariance(cov, state.sigma2_u)

    resid = data.y - data.fitted(state.beta) + (state.eta_plus - state.v)[:, None]
    mu = -cov.apply_inverse(resid) @ omega

    u_plus = state.u_plus.copy()
    periods = np.arange(data.n_periods)

    for t in periods:
        weights, cond_var = conditional_weights(omega, int(t))
        others = np.delete(periods, t)
        cond_mean = mu[:, t] + (u_plus[:, others] - mu[:, others]) @ weights
        u_plus[:, t] = truncated_normal(cond_mean, cond_var, rng)

    return u_plus


def update_eta_plus(
    state: ParameterState, data: PanelDataset, rng: RandomStream
) -> FloatArray:
    cov = state.covariance(data.n_periods)
    psi2 = state.sigma2_eta / (1.0 + state.sigma2_eta * cov.ones_quadratic)

    resid = data.y - data.fitted(state.beta) + state.u_plus - state.v[:, None]
    # 1' Sigma^-1 r = sum(r) / (sigma2_eps + T sigma2_alpha)
    mean = -psi2 * resid.sum(axis=1) / cov.total

    return truncated_normal(mean, psi2, rng)


def update_v(
    state: ParameterState,
    data: PanelDataset,
    graph: SpatialGraph,
    rng: RandomStream,
    center: bool = False,
) -> FloatArray:
    cov = state.covariance(data.n_periods)
    car = graph.car_conditional
    row_sum = car.row_sum

    resid = data.y - data.fitted(state.beta) + state.u_plus + state.eta_plus[:, None]
    data_term = resid.sum(axis=1) / cov.total
    cond_var = 1.0 / (cov.ones_quadratic + row_sum / state.sigma2_v)
    cond_sd = np.sqrt(cond_var)
    noise = rng.standard_normal(graph.n_regions)

    v = state.v.copy()
    for region in range(graph.n_regions):
        neighbor_term = row_sum[region] * car.neighbor_mean(v, region) / state.sigma2_v
        mean = cond_var[region] * (data_term[region] + neighbor_term)
        v[region] = mean + cond_sd[region] * noise[region]

    if center:
        v -= v.mean()

    return v


def car_degrees_of_freedom(
    data: PanelDataset, prior: PriorConfig, mode: CarDegreesOfFreedom
) -> float:
    if mode is CarDegreesOfFreedom.REGIONS:
        return data.n_regions + prior.nbar_v

    return data.n_regions * data.n_periods + prior.nbar_v


def update_sigma2_v(
    state: ParameterState,
    data: PanelDataset,
    graph: SpatialGraph,
    prior: PriorConfig,
    rng: RandomStream,
    mode: CarDegreesOfFreedom = CarDegreesOfFreedom.PANEL,
) -> float:
    scale_sum = prior.qbar_v + car_quadratic_form(graph, state.v)
    df = car_degrees_of_freedom(data, prior, mode)

    return float(sample_scaled_inverse_chi2(scale_sum, df, rng))


def update_sigma2_u(
    state: ParameterState, prior: PriorConfig, rng: RandomStream
) -> float:
    prior_shape, prior_scale = prior.sigma2_u_prior
    shape = prior_shape + state.u_plus.size / 2.0
    scale = prior_scale + float(np.sum(state.u_plus**2)) / 2.0

    return float(sample_inverse_gamma(shape, scale, rng))


def update_sigma2_eta(
    state: ParameterState, prior: PriorConfig, rng: RandomStream
) -> float:
    prior_shape, prior_scale = prior.sigma2_eta_prior
    shape = prior_shape + state.eta_plus.size / 2.0
    scale = prior_scale + float(np.sum(state.eta_plus**2)) / 2.0

    return float(sample_inverse_gamma(shape, scale, rng))


def propose_scaled_chi2(current: float, step_scale: float, rng: RandomStream) -> float:
    """sigma2' = sigma2 * (z / m1)^step_scale with z ~ chi2(1)."""
    return current * (rng.chisquare(1) / CHI2_1_MEDIAN) ** step_scale


def scaled_chi2_log_proposal(target: float, origin: float, step_scale: float) -> float:
    """log q(target | origin) for the multiplicative chi2(1) proposal."""
    log_ratio = log(target / origin)
    z = CHI2_1_MEDIAN * (target / origin) ** (1.0 / step_scale)
    log_chi2 = -0.5 * log(2.0 * pi) - 0.5 * log(z) - 0.5 * z

    return (
        log_chi2
        + log(CHI2_1_MEDIAN)
        - log(step_scale)
        + (1.0 / step_scale - 1.0) * log_ratio
        - log(origin)
    )


def metropolis_hastings_step(
    current: float, log_target: LogDensity, step_scale: float, rng: RandomStream
) -> tuple[float, bool]:
    proposal = propose_scaled_chi2(current, step_scale, rng)
    log_uniform = log(1.0 - rng.random())

    if not (isfinite(proposal) and proposal > 0):
        return current, False

    log_ratio = (
        log_target(proposal)
        - log_target(current)
        + scaled_chi2_log_proposal(current, proposal, step_scale)
        - scaled_chi2_log_proposal(proposal, current, step_scale)
    )

    if log_uniform < log_ratio:
        return proposal, True

    return current, False


def panel_log_likelihood(
    sigma2_eps: float,
    sigma2_alpha: float,
    t_len: int,
    n_regions: int,
    sum_squares: float,
    sum_row_squares: float,
) -> float:
    """Gaussian log likelihood of the tau residuals, up to a constant.

    sum_squares is sum_it e_it^2 and sum_row_squares is sum_i (sum_t e_it)^2.
    """
    cov = CompoundSymmetricCov(
        sigma2_eps=sigma2_eps, sigma2_alpha=sigma2_alpha, t_len=t_len
    )
    quadratic = (sum_squares - cov.shrinkage * sum_row_squares) / sigma2_eps

    return -0.5 * n_regions * cov.logdet - 0.5 * quadratic


def update_sigma2_alpha_eps_mh(
    state: ParameterState,
    data: PanelDataset,
    prior: PriorConfig,
    rng: RandomStream,
    step_scale_alpha: float = 1.0,
    step_scale_eps: float = 1.0,
) -> tuple[float, float, tuple[bool, bool]]:
    resid = state.residuals(data)
    sum_squares = float(np.sum(resid**2))
    sum_row_squares = float(np.sum(resid.sum(axis=1) ** 2))

    def log_likelihood(sigma2_eps: float, sigma2_alpha: float) -> float:
        return panel_log_likelihood(
            sigma2_eps,
            sigma2_alpha,
            data.n_periods,
            data.n_regions,
            sum_squares,
            sum_row_squares,
        )

    def log_target_alpha(value: float) -> float:
        return log_likelihood(state.sigma2_eps, value) + scaled_inverse_chi2_logpdf(
            value, prior.qbar_alpha, prior.nbar_alpha
        )

    sigma2_alpha, accepted_alpha = metropolis_hastings_step(
        state.sigma2_alpha, log_target_alpha, step_scale_alpha, rng
    )

    def log_target_eps(value: float) -> float:
        return log_likelihood(value, sigma2_alpha) + scaled_inverse_chi2_logpdf(
            value, prior.qbar_eps, prior.nbar_eps
        )

    sigma2_eps, accepted_eps = metropolis_hastings_step(
        state.sigma2_eps, log_target_eps, step_scale_eps, rng
    )

    return sigma2_alpha, sigma2_eps, (accepted_alpha, accepted_eps)


@dataclass(frozen=True)
class RegionSummary:
    """Sufficient statistics of r = y - X beta + eta 1_T + u = alpha + v + eps."""

    t_len: int
    n_within: int
    within_ss: float
    projected_means: FloatArray


def region_summary(
    state: ParameterState, data: PanelDataset, spectrum: CarSpectrum
) -> RegionSummary:
    resid = data.y - data.fitted(state.beta) + state.u_plus + state.eta_plus[:, None]
    means = resid.mean(axis=1)

    return RegionSummary(
        t_len=data.n_periods,
        n_within=data.n_regions * (data.n_periods - 1),
        within_ss=float(np.sum((resid - means[:, None]) ** 2)),
        projected_means=spectrum.project(means),
    )


def collapsed_log_likelihood(
    sigma2_eps: float,
    sigma2_alpha: float,
    sigma2_v: float,
    summary: RegionSummary,
    spectrum: CarSpectrum,
) -> float:
    """Log likelihood with alpha and v integrated out, up to a constant.

    Deviations from the region means carry sigma2_eps alone. The region means,
    rotated into the eigenbasis of D_w - W, are independent with variance
    sigma2_alpha + sigma2_eps / T + sigma2_v / lambda_k; null modes drop out
    under their flat prior.
    """
    positive = spectrum.positive
    mode_var = (
        sigma2_alpha
        + sigma2_eps / summary.t_len
        + sigma2_v / spectrum.eigenvalues[positive]
    )
    within = summary.n_within * log(sigma2_eps) + summary.within_ss / sigma2_eps
    projected = summary.projected_means[positive]
    between = np.sum(np.log(mode_var) + projected**2 / mode_var)

    return -0.5 * (within + float(between))


def update_variances_collapsed(
    state: ParameterState,
    data: PanelDataset,
    graph: SpatialGraph,
    prior: PriorConfig,
    rng: RandomStream,
    step_scales: tuple[float, float, float] = (1.0, 1.0, 1.0),
    sample_sigma2_v: bool = True,
    sample_alpha_eps: bool = True,
) -> tuple[float, float, float, tuple[bool, bool, bool]]:
    """MH steps on sigma2_v, sigma2_alpha and sigma2_eps with v marginalized.

    Returns (sigma2_v, sigma2_alpha, sigma2_eps, accepted). v must be redrawn
    from update_v_block before anything else conditions on it.
    """
    spectrum = graph.car_spectrum
    summary = region_summary(state, data, spectrum)
    step_v, step_alpha, step_eps = step_scales
    sigma2_v, sigma2_alpha, sigma2_eps = (
        state.sigma2_v,
        state.sigma2_alpha,
        state.sigma2_eps,
    )
    accepted = [False, False, False]

    def log_likelihood(eps: float, alpha: float, car: float) -> float:
        return collapsed_log_likelihood(eps, alpha, car, summary, spectrum)

    if sample_sigma2_v:

        def log_target_v(value: float) -> float:
            prior_term = scaled_inverse_chi2_logpdf(value, prior.qbar_v, prior.nbar_v)
            return log_likelihood(sigma2_eps, sigma2_alpha, value) + prior_term

        sigma2_v, accepted[0] = metropolis_hastings_step(
            sigma2_v, log_target_v, step_v, rng
        )

    if sample_alpha_eps:

        def log_target_alpha(value: float) -> float:
            prior_term = scaled_inverse_chi2_logpdf(
                value, prior.qbar_alpha, prior.nbar_alpha
            )
            return log_likelihood(sigma2_eps, value, sigma2_v) + prior_term

        sigma2_alpha, accepted[1] = metropolis_hastings_step(
            sigma2_alpha, log_target_alpha, step_alpha, rng
        )

        def log_target_eps(value: float) -> float:
            prior_term = scaled_inverse_chi2_logpdf(
                value, prior.qbar_eps, prior.nbar_eps
            )
            return log_likelihood(value, sigma2_alpha, sigma2_v) + prior_term

        sigma2_eps, accepted[2] = metropolis_hastings_step(
            sigma2_eps, log_target_eps, step_eps, rng
        )

    return sigma2_v, sigma2_alpha, sigma2_eps, (accepted[0], accepted[1], accepted[2])


def v_block_conditional(
    state: ParameterState, data: PanelDataset, graph: SpatialGraph
) -> tuple[FloatArray, FloatArray]:
    """Mean and standard deviation of v | rest, coordinate-wise in the eigenbasis."""
    spectrum = graph.car_spectrum
    summary = region_summary(state, data, spectrum)
    data_precision = state.covariance(data.n_periods).ones_quadratic

    precision = data_precision + spectrum.eigenvalues / state.sigma2_v
    mean = data_precision * summary.projected_means / precision

    return mean, 1.0 / np.sqrt(precision)


def update_v_block(
    state: ParameterState,
    data: PanelDataset,
    graph: SpatialGraph,
    rng: RandomStream,
    center: bool = False,
) -> FloatArray:
    mean, sd = v_block_conditional(state, data, graph)
    v = graph.car_spectrum.expand(mean + sd * rng.standard_normal(mean.size))

    if center:
        v -= v.mean()

    return v
