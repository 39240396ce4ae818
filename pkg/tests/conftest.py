from pathlib import Path

import numpy as np
import pytest

from hidden_population.sampler import ChainDiagnostics, PosteriorDraws
from hidden_population.simulation import DgpConfig, SimulatedTruth, simulate
from hidden_population.spatial_structure import SpatialGraph, build_queen_grid
from hidden_population.types import RandomStream


@pytest.fixture
def rng() -> RandomStream:
    return np.random.default_rng(20240611)


@pytest.fixture
def grid_3x3() -> SpatialGraph:
    return build_queen_grid(3, 3)


@pytest.fixture(scope="session")
def small_truth() -> SimulatedTruth:
    return simulate(DgpConfig(rows=3, cols=3, periods=3, seed=11))


@pytest.fixture(scope="session")
def baseline_truth() -> SimulatedTruth:
    return simulate(DgpConfig(seed=3))


def make_draws(
    eta_plus: np.ndarray,
    u_plus: np.ndarray,
    beta: np.ndarray | None = None,
    v: np.ndarray | None = None,
    **variances: np.ndarray,
) -> PosteriorDraws:
    """PosteriorDraws from latent arrays shaped (S, N) and (S, N, T)."""
    n_draws, n_regions = eta_plus.shape
    ones = np.ones(n_draws)

    return PosteriorDraws(
        beta=np.zeros((n_draws, 2)) if beta is None else beta,
        u_plus=u_plus,
        eta_plus=eta_plus,
        v=np.zeros((n_draws, n_regions)) if v is None else v,
        sigma2_alpha=variances.get("sigma2_alpha", 0.01 * ones),
        sigma2_eps=variances.get("sigma2_eps", 0.01 * ones),
        sigma2_v=variances.get("sigma2_v", 0.16 * ones),
        sigma2_u=variances.get("sigma2_u", 0.04 * ones),
        sigma2_eta=variances.get("sigma2_eta", 0.25 * ones),
        chain=np.zeros(n_draws, dtype=np.int64),
        diagnostics=(
            ChainDiagnostics(
                chain=0,
                n_iter=n_draws,
                acceptance_alpha=0.5,
                acceptance_eps=0.5,
                floored={},
            ),
        ),
        metadata={"average_row_sum": 2.0},
    )


@pytest.fixture
def draws_factory():
    return make_draws


def write_lines(path: Path, *lines: str) -> Path:
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def lines_file(tmp_path: Path):
    def factory(name: str, *lines: str) -> Path:
        return write_lines(tmp_path / name, *lines)

    return factory
