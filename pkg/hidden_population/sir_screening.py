"""Standardized incidence ratios and gamma-Poisson exceedance screening.

Given S_it ~ Poisson(eta_it E_it) and a Gamma(nu, alpha) prior on the relative
risk, eta_it | s_it ~ Gamma(shape s_it + nu, rate E_it + alpha). Cells whose
posterior P(eta_it > 1) clears a threshold are flagged as hot spots.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger

import numpy as np
from scipy.special import gammaincc

from .exceptions import DataValidationError, InvalidArgumentError
from .types import BoolArray, FloatArray, IntArray

logger = getLogger("hidden_population")

PRIOR_NU = 0.01
PRIOR_ALPHA = 0.01
HOTSPOT_THRESHOLDS = (0.90, 0.95, 0.99)
NO_TIER = "none"


@dataclass(frozen=True)
class CountPanel:
    s: IntArray
    n: FloatArray
    region_ids: IntArray = field(default=None)  # type: ignore [assignment]
    time_ids: IntArray = field(default=None)  # type: ignore [assignment]

    def __post_init__(self) -> None:
        s = np.asarray(self.s)
        n = np.asarray(self.n, dtype=float)

        if s.ndim != 2 or s.shape != n.shape:
            raise DataValidationError(
                f"counts {s.shape} and populations {n.shape} must be matching N x T"
            )
        if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s != np.round(s)):
            raise DataValidationError("counts must be non-negative integers")
        if not np.all(np.isfinite(n)) or np.any(n <= 0):
            raise DataValidationError("populations must be positive")

        object.__setattr__(self, "s", s.astype(np.int64))
        object.__setattr__(self, "n", n)
        if self.region_ids is None:
            object.__setattr__(self, "region_ids", np.arange(s.shape[0]))
        if self.time_ids is None:
            object.__setattr__(self, "time_ids", np.arange(s.shape[1]))


@dataclass(frozen=True)
class SirTable:
    panel: CountPanel
    sir: FloatArray
    expected: FloatArray
    undefined: BoolArray
    exceedance: FloatArray | None = None
    prior_nu: float = PRIOR_NU
    prior_alpha: float = PRIOR_ALPHA


def compute_sir(panel: CountPanel) -> SirTable:
    """SIR with expected counts standardized within each period.

    E_it = n_it * sum_j s_jt / sum_j n_jt
    """
    rate = panel.s.sum(axis=0) / panel.n.sum(axis=0)
    expected = panel.n * rate[None, :]

    undefined = expected <= 0
    if n_undefined := int(undefined.sum()):
        empty_periods = panel.time_ids[panel.s.sum(axis=0) == 0].tolist()
        logger.warning(
            f"SIR undefined for {n_undefined} cells, "
            f"no counts in periods {empty_periods}"
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(undefined, np.nan, panel.s / np.where(undefined, 1.0, expected))

    return SirTable(panel=panel, sir=sir, expected=expected, undefined=undefined)


def exceedance_probability(
    s: IntArray | int,
    expected: FloatArray | float,
    nu: float = PRIOR_NU,
    alpha: float = PRIOR_ALPHA,
) -> FloatArray:
    """P(eta > 1) under Gamma(shape s + nu, rate E + alpha)."""
    s = np.asarray(s, dtype=float)
    expected = np.asarray(expected, dtype=float)

    if nu <= 0 or alpha <= 0:
        raise InvalidArgumentError(
            f"prior nu and alpha must be positive, got {nu}, {alpha}"
        )
    if np.any(s < 0):
        raise InvalidArgumentError("counts must be non-negative")
    if np.any(expected <= 0):
        raise InvalidArgumentError("expected counts must be positive")

    # regularized upper incomplete gamma Q(a, rate * 1)
    return gammaincc(s + nu, expected + alpha)


def add_exceedance(
    table: SirTable, nu: float = PRIOR_NU, alpha: float = PRIOR_ALPHA
) -> SirTable:
    exceedance = np.full(table.expected.shape, np.nan)
    defined = ~table.undefined
    exceedance[defined] = exceedance_probability(
        table.panel.s[defined], table.expected[defined], nu, alpha
    )

    return replace(table, exceedance=exceedance, prior_nu=nu, prior_alpha=alpha)


def tier_label(threshold: float) -> str:
    return f"{threshold * 100:g}"


def flag_hotspots(
    table: SirTable, thresholds: tuple[float, ...] = HOTSPOT_THRESHOLDS
) -> np.ndarray:
    """Label each cell with the highest threshold its exceedance reaches (inclusive)."""
    if table.exceedance is None:
        raise InvalidArgumentError("exceedance probabilities have not been computed")
    if not all(0 < threshold < 1 for threshold in thresholds):
        raise InvalidArgumentError(f"thresholds must lie in (0, 1), got {thresholds}")

    tiers = np.full(table.exceedance.shape, NO_TIER, dtype=object)
    for threshold in sorted(thresholds):
        tiers[table.exceedance >= threshold] = tier_label(threshold)

    return tiers
