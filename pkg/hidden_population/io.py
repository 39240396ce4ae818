"""File formats: panel, truth and count CSVs, draws directories, result tables."""

import json
from dataclasses import asdict
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .config import settings
from .exceptions import DataValidationError, FormatError
from .posterior_analysis import CoverageReport, MapeSummary, TruthPanel
from .sampler import ChainDiagnostics, PanelDataset, PosteriorDraws
from .simulation import SimulatedTruth
from .sir_screening import CountPanel, SirTable
from .types import FloatArray

logger = getLogger("hidden_population")

PANEL_KEYS = ("region", "time")
TRUTH_COLUMNS = ("u_plus", "eta_plus", "v", "alpha", "P")
COUNT_COLUMNS = ("count", "population")
DRAWS_META = "meta.json"


def float_format() -> str:
    return f"%.{settings.float_significant_digits}g"


def write_table(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=float_format())
    logger.debug(f"Wrote {len(frame)} rows to {path}")


def _read_csv(path: Path, required: tuple[str, ...]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot parse CSV: {exc}", path) from exc

    if missing := [column for column in required if column not in frame.columns]:
        raise FormatError(f"missing columns {missing}", path, 1)

    for position, column in enumerate(frame.columns):
        if not pd.api.types.is_numeric_dtype(frame[column]):
            bad = pd.to_numeric(frame[column], errors="coerce").isna().to_numpy()
            row = int(np.flatnonzero(bad)[0]) if bad.any() else 0
            # header is line 1
            raise FormatError(
                f"non-numeric value in column {column!r} (column {position + 1})",
                path,
                row + 2,
            )

    return frame


def _to_grid(
    frame: pd.DataFrame, path: Path, columns: list[str]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reshape long (region, time) rows into N x T x len(columns)."""
    if frame.empty:
        raise DataValidationError(f"{path}: no data rows")
    if frame.duplicated(list(PANEL_KEYS)).any():
        raise DataValidationError(f"{path}: duplicate (region, time) rows")

    frame = frame.sort_values(list(PANEL_KEYS), kind="stable")
    regions = np.sort(frame["region"].unique())
    times = np.sort(frame["time"].unique())

    if len(frame) != regions.size * times.size:
        raise DataValidationError(
            f"{path}: unbalanced panel, {len(frame)} rows for "
            f"{regions.size} regions x {times.size} periods"
        )

    values = frame[columns].to_numpy(dtype=float)
    return (
        values.reshape(regions.size, times.size, len(columns)),
        regions.astype(np.int64),
        times.astype(np.int64),
    )


def read_panel(path: Path | str) -> PanelDataset:
    """Read `region,time,y,x1,...,xK`.

    Regions are ordered by id; position i in that order is graph index i.
    """
    path = Path(path)
    frame = _read_csv(path, (*PANEL_KEYS, "y"))

    regressors = [
        column for column in frame.columns if column not in (*PANEL_KEYS, "y")
    ]
    if not regressors:
        raise FormatError("no regressor columns after y", path, 1)

    grid, regions, times = _to_grid(frame, path, ["y", *regressors])
    logger.info(
        f"Read panel {path}: {regions.size} regions, {times.size} periods, "
        f"{len(regressors)} regressors"
    )

    return PanelDataset(
        y=grid[:, :, 0],
        x=grid[:, :, 1:],
        region_ids=regions,
        time_ids=times,
        regressor_names=tuple(regressors),
    )


def _long_index(region_ids: np.ndarray, time_ids: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "region": np.repeat(region_ids, time_ids.size),
        "time": np.tile(time_ids, region_ids.size),
    }


def write_panel(dataset: PanelDataset, path: Path) -> None:
    columns: dict[str, Any] = _long_index(dataset.region_ids, dataset.time_ids)
    columns["y"] = dataset.y.ravel()
    for k, name in enumerate(dataset.regressor_names):
        columns[name] = dataset.x[:, :, k].ravel()

    # panel inputs keep full precision so a fit reproduces from the file
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")


def write_truth(truth: SimulatedTruth, path: Path) -> None:
    dataset = truth.dataset
    columns: dict[str, Any] = _long_index(dataset.region_ids, dataset.time_ids)
    n_periods = dataset.n_periods

    columns["u_plus"] = truth.true_u_plus.ravel()
    columns["eta_plus"] = np.repeat(truth.true_eta_plus, n_periods)
    columns["v"] = np.repeat(truth.true_v, n_periods)
    columns["alpha"] = np.repeat(truth.true_alpha, n_periods)
    columns["P"] = truth.true_P.ravel()

    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")


def read_truth(path: Path | str) -> TruthPanel:
    path = Path(path)
    frame = _read_csv(path, (*PANEL_KEYS, *TRUTH_COLUMNS))
    grid, _, _ = _to_grid(frame, path, list(TRUTH_COLUMNS))

    return TruthPanel(
        true_u_plus=grid[:, :, 0],
        true_eta_plus=grid[:, 0, 1],
        true_v=grid[:, 0, 2],
        true_alpha=grid[:, 0, 3],
        true_P=grid[:, :, 4],
    )


def write_draws(draws: PosteriorDraws, directory: Path) -> None:
    """One .npy file per column plus a sorted-key JSON metadata file."""
    directory.mkdir(parents=True, exist_ok=True)

    for name, values in draws.columns().items():
        np.save(directory / f"{name}.npy", np.ascontiguousarray(values))

    meta = {
        "metadata": draws.metadata,
        "diagnostics": [asdict(diagnostic) for diagnostic in draws.diagnostics],
        "columns": sorted(draws.columns()),
        "n_draws": draws.n_draws,
    }
    (directory / DRAWS_META).write_text(json.dumps(meta, sort_keys=True, indent=2))


def read_draws(directory: Path | str) -> PosteriorDraws:
    directory = Path(directory)
    meta_path = directory / DRAWS_META

    if not meta_path.is_file():
        raise FormatError(f"not a draws directory, {DRAWS_META} is missing", directory)

    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", meta_path, exc.lineno) from exc

    columns = {}
    for name in meta["columns"]:
        try:
            columns[name] = np.load(directory / f"{name}.npy", allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot load column {name}: {exc}", directory) from exc

    draws = PosteriorDraws(
        **columns,
        diagnostics=tuple(ChainDiagnostics(**item) for item in meta["diagnostics"]),
        metadata=meta["metadata"],
    )
    if draws.n_draws == 0:
        raise DataValidationError(f"{directory} holds no posterior draws")

    logger.info(f"Read {draws.n_draws} draws from {directory}")
    return draws


def draws_frame(draws: PosteriorDraws) -> pd.DataFrame:
    """Wide export: one row per stored draw."""
    n_draws = draws.n_draws
    names = draws.metadata.get("regressor_names") or [
        f"x{k + 1}" for k in range(draws.beta.shape[1])
    ]

    columns: dict[str, FloatArray] = {
        "chain": draws.chain,
        "draw": np.arange(n_draws),
        **{f"beta_{name}": draws.beta[:, k] for k, name in enumerate(names)},
    }
    for name in ("sigma2_alpha", "sigma2_eps", "sigma2_v", "sigma2_u", "sigma2_eta"):
        columns[name] = getattr(draws, name)
    for i in range(draws.n_regions):
        columns[f"eta_plus_{i}"] = draws.eta_plus[:, i]
    for i in range(draws.n_regions):
        columns[f"v_{i}"] = draws.v[:, i]

    flat_u = draws.u_plus.reshape(n_draws, -1)
    for cell in range(flat_u.shape[1]):
        i, t = divmod(cell, draws.n_periods)
        columns[f"u_plus_{i}_{t}"] = flat_u[:, cell]

    return pd.DataFrame(columns)


def acceptance_frame(draws: PosteriorDraws) -> pd.DataFrame:
    rows = []
    for diagnostic in draws.diagnostics:
        for block, rate in (
            ("sigma2_alpha", diagnostic.acceptance_alpha),
            ("sigma2_eps", diagnostic.acceptance_eps),
            ("sigma2_v", diagnostic.acceptance_v),
        ):
            rows.append(
                {
                    "chain": diagnostic.chain,
                    "block": block,
                    "rate": rate,
                    "floored": diagnostic.floored.get(block, 0),
                }
            )
        for block in ("sigma2_u", "sigma2_eta"):
            rows.append(
                {
                    "chain": diagnostic.chain,
                    "block": block,
                    "rate": 1.0,
                    "floored": diagnostic.floored.get(block, 0),
                }
            )

    return pd.DataFrame(rows, columns=["chain", "block", "rate", "floored"])


def coverage_frame(reports: list[CoverageReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "level": report.nominal_level,
                "mean_coverage": report.posterior_mean_coverage,
                "hdi_lower": report.coverage_hdi[0],
                "hdi_upper": report.coverage_hdi[1],
                "a": report.a,
                "b": report.b,
                "covered": report.n_covered,
                "cells": report.n_cells,
            }
            for report in reports
        ]
    )


def mape_frame(summaries: dict[str, MapeSummary]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "variant": variant,
                "average": summary.average,
                "median": summary.median,
                "hdi_lower": summary.hdi_pair[0],
                "hdi_upper": summary.hdi_pair[1],
                "cells": summary.n_cells,
                "excluded": summary.n_excluded,
            }
            for variant, summary in summaries.items()
        ]
    )


def read_counts(path: Path | str) -> CountPanel:
    """Read `region,time,count,population`."""
    path = Path(path)
    frame = _read_csv(path, (*PANEL_KEYS, *COUNT_COLUMNS))
    grid, regions, times = _to_grid(frame, path, list(COUNT_COLUMNS))

    return CountPanel(
        s=grid[:, :, 0], n=grid[:, :, 1], region_ids=regions, time_ids=times
    )


def sir_frame(table: SirTable, tiers: np.ndarray) -> pd.DataFrame:
    panel = table.panel
    columns: dict[str, Any] = _long_index(panel.region_ids, panel.time_ids)
    columns["sir"] = table.sir.ravel()
    columns["expected"] = table.expected.ravel()
    columns["exceedance"] = (
        table.exceedance.ravel()
        if table.exceedance is not None
        else np.full(table.sir.size, np.nan)
    )
    columns["tier"] = tiers.ravel()

    return pd.DataFrame(columns)
