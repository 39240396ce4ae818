import numpy as np
import pytest
from pydantic import ValidationError

from hidden_population.exceptions import InvalidArgumentError
from hidden_population.simulation import (
    DgpConfig,
    EpsLaw,
    ScenarioRescale,
    draw_car_field,
    lambda_of,
    make_lambda_scenario,
    simulate,
)
from hidden_population.spatial_structure import build_queen_grid, car_quadratic_form


def test_baseline_shapes(baseline_truth):
    data = baseline_truth.dataset

    assert data.y.shape == (49, 5)
    assert data.x.shape == (49, 5, 2)
    assert baseline_truth.n_cells == 245
    assert data.regressor_names == ("z", "lag_z")


def test_outcome_reconstructs_from_components(baseline_truth):
    truth = baseline_truth
    data = truth.dataset

    rebuilt = (
        data.fitted(np.array([0.5, -0.5]))
        + (truth.true_alpha + truth.true_v - truth.true_eta_plus)[:, None]
        - truth.true_u_plus
        + truth.true_eps
    )

    np.testing.assert_allclose(data.y, rebuilt, atol=1e-12)


def test_hidden_population_relation(baseline_truth):
    truth = baseline_truth
    undercount = np.exp(-(truth.true_eta_plus[:, None] + truth.true_u_plus))

    np.testing.assert_allclose(truth.y_level, truth.true_P * undercount, rtol=1e-12)
    assert np.all(truth.y_level < truth.true_P)


def test_lag_regressor_is_raw_weighted_sum(baseline_truth):
    data = baseline_truth.dataset
    weights = baseline_truth.graph.weights.toarray()

    np.testing.assert_allclose(data.x[:, :, 1], weights @ data.x[:, :, 0])


def test_car_field_sums_to_zero(rng):
    graph = build_queen_grid(10, 10)
    field = draw_car_field(graph, 0.4, rng)

    assert field.shape == (100,)
    assert abs(field.sum()) < 1e-10


def test_car_field_scale(rng):
    graph = build_queen_grid(6, 6)
    # E[v'(D-W)v] = sigma_v^2 * (N - 1) for the intrinsic field
    quadratic = np.mean(
        [car_quadratic_form(graph, draw_car_field(graph, 0.5, rng)) for _ in range(400)]
    )

    assert quadratic == pytest.approx(0.25 * 35, rel=0.05)


def test_same_seed_same_panel():
    first = simulate(DgpConfig(seed=8))
    second = simulate(DgpConfig(seed=8))
    other = simulate(DgpConfig(seed=9))

    np.testing.assert_array_equal(first.dataset.y, second.dataset.y)
    assert not np.array_equal(first.dataset.y, other.dataset.y)


def test_noiseless_limit():
    tiny = 1e-12
    truth = simulate(
        DgpConfig(
            sigma_alpha=tiny,
            sigma_eta=tiny,
            sigma_u=tiny,
            sigma_eps=tiny,
            sigma_v=tiny,
            seed=2,
        )
    )
    data = truth.dataset

    np.testing.assert_allclose(
        data.y, 0.5 * data.x[:, :, 0] - 0.5 * data.x[:, :, 1], atol=1e-6
    )


def test_half_normal_one_sided_errors():
    truth = simulate(DgpConfig(rows=30, cols=30, periods=20, seed=4))

    assert np.all(truth.true_u_plus >= 0) and np.all(truth.true_eta_plus >= 0)
    half_normal_mean = np.sqrt(2 / np.pi)

    assert truth.true_u_plus.mean() == pytest.approx(0.2 * half_normal_mean, abs=0.005)
    assert truth.true_eta_plus.mean() == pytest.approx(0.5 * half_normal_mean, abs=0.04)


def test_student_t_errors_are_heavier_tailed():
    normal = simulate(DgpConfig(rows=20, cols=20, periods=10, seed=6))
    heavy = simulate(
        DgpConfig(
            rows=20,
            cols=20,
            periods=10,
            seed=6,
            eps_law=EpsLaw.STUDENT_T,
            student_t_df=3,
        )
    )

    def kurtosis(values):
        centered = values - values.mean()
        return np.mean(centered**4) / np.mean(centered**2) ** 2

    assert kurtosis(heavy.true_eps) > kurtosis(normal.true_eps) + 0.5


@pytest.mark.parametrize("df", [2.0, 1.5])
def test_student_t_needs_finite_variance(df):
    with pytest.raises(ValidationError):
        DgpConfig(eps_law=EpsLaw.STUDENT_T, student_t_df=df)


@pytest.mark.parametrize(
    "fields", [{"rows": 1, "cols": 1}, {"periods": 0}, {"sigma_u": 0.0}]
)
def test_config_validation(fields):
    with pytest.raises(ValidationError):
        DgpConfig(**fields)


def test_baseline_lambda():
    assert lambda_of(DgpConfig()) == pytest.approx(7.0)


@pytest.mark.parametrize("target, sigma_eps", [(0.1, 7.0), (1.0, 0.7), (10.0, 0.07)])
def test_noise_scenario_solves_for_sigma_eps(target, sigma_eps):
    config = make_lambda_scenario(target, DgpConfig())

    assert config.sigma_eps == pytest.approx(sigma_eps)
    assert (config.sigma_eta, config.sigma_u) == (0.5, 0.2)
    assert lambda_of(config) == pytest.approx(target)


def test_one_sided_scenario_keeps_noise_and_ratio():
    config = make_lambda_scenario(
        0.7, DgpConfig(sigma_eps=1.0), ScenarioRescale.ONE_SIDED
    )

    assert config.sigma_eps == 1.0
    assert config.sigma_eta == pytest.approx(0.5)
    assert config.sigma_u == pytest.approx(0.2)


@pytest.mark.parametrize(
    "target, sigma_eta, sigma_u, sigma_eps",
    [(0.1, 0.0714, 0.0286, 1.0), (1.0, 0.714, 0.286, 1.0), (10.0, 0.714, 0.286, 0.1)],
)
def test_sweep_scenario_layout(target, sigma_eta, sigma_u, sigma_eps):
    config = make_lambda_scenario(target, DgpConfig(), ScenarioRescale.SWEEP)

    assert config.sigma_eta == pytest.approx(sigma_eta, abs=1e-3)
    assert config.sigma_u == pytest.approx(sigma_u, abs=1e-3)
    assert config.sigma_eps == pytest.approx(sigma_eps)
    assert lambda_of(config) == pytest.approx(target)


@pytest.mark.parametrize("target", [0.0, -1.0])
def test_scenario_rejects_nonpositive_lambda(target):
    with pytest.raises(InvalidArgumentError):
        make_lambda_scenario(target, DgpConfig())
