"""Full-length Monte Carlo runs; deselected by default, run with `-m slow`."""

import numpy as np
import pytest

from hidden_population.posterior_analysis import (
    coverage_report,
    hidden_population_intervals,
    latent_summary,
    mape_summary,
    parameter_summary,
    uncaptured_summaries,
)
from hidden_population.sampler import ChainConfig, PriorConfig, run_chain
from hidden_population.simulation import (
    BENCHMARK_SAMPLE_SIZES,
    DgpConfig,
    EpsLaw,
    ScenarioRescale,
    make_lambda_scenario,
    simulate,
)

pytestmark = pytest.mark.slow

FULL_RUN = ChainConfig(n_iter=20000, burn_in=10000, thin=5, seed=1)


def fit(truth):
    return run_chain(truth.dataset, truth.graph, PriorConfig(), FULL_RUN)


@pytest.mark.parametrize("rows, cols, periods", BENCHMARK_SAMPLE_SIZES[:2])
def test_parameters_are_recovered(rows, cols, periods):
    truth = simulate(DgpConfig(rows=rows, cols=cols, periods=periods, seed=1))
    draws = fit(truth)
    summary = parameter_summary(draws).set_index("parameter")

    for name, value in (("z", 0.5), ("lag_z", -0.5)):
        assert summary.loc[name, "hdi_lower"] <= value <= summary.loc[name, "hdi_upper"]
    assert summary.loc["sigma_eta", "median"] == pytest.approx(0.5, abs=0.25)

    intervals = hidden_population_intervals(draws, truth.y_level, 0.95)
    report = coverage_report(
        intervals, truth, 0.95, 10_000, np.random.default_rng(0)
    )
    assert report.posterior_mean_coverage > 0.8


def test_latent_components_track_truth():
    truth = simulate(DgpConfig(seed=5))
    frame = latent_summary(fit(truth), truth).set_index("component")

    assert frame.loc["eta_plus", "rho_hat"] > 0.3
    assert frame.loc["v", "rho_hat"] > 0.3


@pytest.mark.parametrize("target", [0.5, 7.0])
def test_uncaptured_share_follows_lambda(target):
    config = make_lambda_scenario(target, DgpConfig(seed=2), ScenarioRescale.NOISE)
    truth = simulate(config)
    summary = uncaptured_summaries(fit(truth), truth.graph)

    true_share = float(
        np.mean(1 - np.exp(-(truth.true_eta_plus[:, None] + truth.true_u_plus)))
    )
    assert summary.total_pct == pytest.approx(true_share, abs=0.15)


def fitted_summary(truth):
    return parameter_summary(fit(truth)).set_index("parameter")


def test_spatial_scale_is_recovered():
    summary = fitted_summary(simulate(DgpConfig(seed=1))).loc["sigma_v"]

    assert summary["hdi_lower"] <= 0.4 <= summary["hdi_upper"]


def test_beta_interval_shrinks_with_the_panel():
    widths = []
    for rows, cols, periods in ((7, 7, 5), (14, 14, 10)):
        truth = simulate(DgpConfig(rows=rows, cols=cols, periods=periods, seed=1))
        summary = fitted_summary(truth)
        widths.append(summary.loc["z", "hdi_upper"] - summary.loc["z", "hdi_lower"])

    assert widths[1] < widths[0]


def test_coverage_matches_nominal_levels():
    truth = simulate(DgpConfig(rows=10, cols=10, periods=10, seed=1))
    draws = fit(truth)
    rng = np.random.default_rng(0)

    for level, tolerance in ((0.90, 0.07), (0.95, 0.05), (0.99, 0.02)):
        intervals = hidden_population_intervals(draws, truth.y_level, level)
        report = coverage_report(intervals, truth, level, 10_000, rng)
        assert report.posterior_mean_coverage == pytest.approx(level, abs=tolerance)


@pytest.mark.parametrize("rows, cols, periods", BENCHMARK_SAMPLE_SIZES)
def test_hidden_population_error_is_small(rows, cols, periods):
    truth = simulate(DgpConfig(rows=rows, cols=cols, periods=periods, seed=1))
    summary = mape_summary(fit(truth), truth)

    assert summary.median <= 0.15
    assert summary.average <= 0.35


def test_beta_survives_dominant_one_sided_errors():
    config = make_lambda_scenario(10.0, DgpConfig(seed=1), ScenarioRescale.SWEEP)
    summary = fitted_summary(simulate(config))

    assert summary.loc["z", "mean"] == pytest.approx(0.5, abs=0.06)


def test_beta_intervals_hold_under_student_t_noise():
    config = DgpConfig(eps_law=EpsLaw.STUDENT_T, student_t_df=4.0, seed=1)
    summary = fitted_summary(simulate(config))

    for name, value in (("z", 0.5), ("lag_z", -0.5)):
        assert summary.loc[name, "hdi_lower"] <= value <= summary.loc[name, "hdi_upper"]
