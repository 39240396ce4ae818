from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from hidden_population.exceptions import DataValidationError, InvalidArgumentError
from hidden_population.sir_screening import (
    NO_TIER,
    CountPanel,
    add_exceedance,
    compute_sir,
    exceedance_probability,
    flag_hotspots,
    tier_label,
)


def test_two_region_example():
    table = compute_sir(CountPanel(s=[[10], [30]], n=[[100], [100]]))

    np.testing.assert_allclose(table.expected.ravel(), [20.0, 20.0])
    np.testing.assert_allclose(table.sir.ravel(), [0.5, 1.5])
    assert not table.undefined.any()


def test_uniform_incidence_gives_unit_ratios():
    n = np.array([[50.0, 80.0], [150.0, 20.0], [300.0, 100.0]])
    table = compute_sir(CountPanel(s=(n / 10).astype(int), n=n))

    np.testing.assert_allclose(table.sir, 1.0)


@settings(max_examples=50, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=0, max_value=500), min_size=2, max_size=12),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_expected_counts_conserve_totals(counts, seed):
    s = np.array(counts).reshape(-1, 1)
    n = np.random.default_rng(seed).uniform(10, 10_000, size=s.shape)
    table = compute_sir(CountPanel(s=s, n=n))

    if s.sum() == 0:
        assert table.undefined.all()
        assert np.isnan(table.sir).all()
    else:
        assert table.expected.sum() == pytest.approx(s.sum())


def test_empty_period_is_undefined(caplog):
    panel = CountPanel(s=[[0, 4], [0, 6]], n=[[10, 10], [10, 30]])
    table = compute_sir(panel)

    assert table.undefined[:, 0].all() and not table.undefined[:, 1].any()
    assert np.isnan(table.sir[:, 0]).all()
    assert "no counts in periods [0]" in caplog.text

    flagged = add_exceedance(table)
    assert np.isnan(flagged.exceedance[:, 0]).all()
    assert (flag_hotspots(flagged)[:, 0] == NO_TIER).all()


@pytest.mark.parametrize(
    "s, n",
    [
        ([[-1, 2]], [[10, 10]]),
        ([[1.5, 2]], [[10, 10]]),
        ([[1, 2]], [[10, 0]]),
        ([[1, 2]], [[10, 10, 10]]),
        ([1, 2], [10, 10]),
    ],
)
def test_count_panel_validation(s, n):
    with pytest.raises(DataValidationError):
        CountPanel(s=s, n=n)


@pytest.mark.parametrize(
    "s, expected", [(0, 0.5), (3, 2.0), (20, 20.0), (40, 25.0), (7, 0.1)]
)
def test_exceedance_matches_quadrature(s, expected):
    nu = alpha = 0.01
    law = stats.gamma(a=s + nu, scale=1.0 / (expected + alpha))
    tail, _ = integrate.quad(law.pdf, 1.0, np.inf, epsabs=1e-12, epsrel=1e-10)

    assert float(exceedance_probability(s, expected, nu, alpha)) == pytest.approx(
        tail, abs=1e-8
    )


def test_exceedance_reference_points():
    assert float(exceedance_probability(20, 20.0)) == pytest.approx(0.5, abs=0.05)
    assert float(exceedance_probability(0, 1000.0)) < 1e-10
    assert float(exceedance_probability(60, 20.0)) > 0.999


@settings(max_examples=60, deadline=None)
@given(
    s=st.integers(min_value=0, max_value=300),
    expected=st.floats(min_value=0.5, max_value=300.0),
)
def test_exceedance_is_monotone(s, expected):
    base = exceedance_probability(s, expected)

    assert 0.0 <= base <= 1.0
    assert exceedance_probability(s + 1, expected) >= base
    assert exceedance_probability(s, expected * 1.1) <= base


@pytest.mark.parametrize(
    "kwargs",
    [
        {"s": -1, "expected": 1.0},
        {"s": 1, "expected": 0.0},
        {"s": 1, "expected": 1.0, "nu": 0.0},
        {"s": 1, "expected": 1.0, "alpha": -0.1},
    ],
)
def test_exceedance_rejects_bad_arguments(kwargs):
    with pytest.raises(InvalidArgumentError):
        exceedance_probability(**kwargs)


def test_hotspot_tiers_are_inclusive():
    table = replace(
        compute_sir(CountPanel(s=[[1]] * 5, n=[[1]] * 5)),
        exceedance=np.array([[0.96], [0.90], [0.5], [0.99], [np.nan]]),
    )

    assert flag_hotspots(table).ravel().tolist() == ["95", "90", NO_TIER, "99", NO_TIER]


def test_flag_hotspots_needs_exceedance():
    table = compute_sir(CountPanel(s=[[1], [2]], n=[[10], [10]]))

    with pytest.raises(InvalidArgumentError):
        flag_hotspots(table)
    with pytest.raises(InvalidArgumentError):
        flag_hotspots(add_exceedance(table), thresholds=(0.9, 1.0))


@pytest.mark.parametrize(
    "threshold, label", [(0.9, "90"), (0.95, "95"), (0.99, "99"), (0.975, "97.5")]
)
def test_tier_label(threshold, label):
    assert tier_label(threshold) == label
