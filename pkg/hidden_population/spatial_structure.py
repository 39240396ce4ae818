from dataclasses import dataclass
from functools import cached_property
from logging import getLogger
from pathlib import Path

import numpy as np
from scipy import sparse

from .exceptions import DataValidationError, FormatError, InvalidArgumentError
from .types import BoolArray, FloatArray, IntArray

logger = getLogger("hidden_population")

# sigma_v / (0.7 * mean degree) is the marginal spatial standard deviation
MARGINAL_SD_FACTOR = 0.7

# optional header line of an edge-list file declaring the region count
REGIONS_DIRECTIVE = "# regions:"

NULL_EIGENVALUE_TOL = 1e-9


@dataclass(frozen=True)
class CarConditional:
    """Per-region conditional law of the intrinsic CAR field.

    v_i | v_-i ~ N(sum_j cond_mean_weighting_ij v_j, sigma2_v / row_sum_i)
    """

    cond_mean_weighting: sparse.csr_matrix
    row_sum: FloatArray

    def neighbor_mean(self, v: FloatArray, region: int) -> float:
        start, end = self.cond_mean_weighting.indptr[region : region + 2]
        columns = self.cond_mean_weighting.indices[start:end]
        return float(self.cond_mean_weighting.data[start:end] @ v[columns])

    def moments(
        self, v: FloatArray, sigma2_v: float, region: int
    ) -> tuple[float, float]:
        return self.neighbor_mean(v, region), sigma2_v / float(self.row_sum[region])


@dataclass(frozen=True)
class CarSpectrum:
    """Eigenbasis of D_w - W. Null modes carry a flat prior and eigenvalue 0."""

    eigenvalues: FloatArray
    eigenvectors: FloatArray

    @property
    def positive(self) -> BoolArray:
        return self.eigenvalues > 0

    @property
    def n_null(self) -> int:
        return int((~self.positive).sum())

    def project(self, values: FloatArray) -> FloatArray:
        return self.eigenvectors.T @ values

    def expand(self, coefficients: FloatArray) -> FloatArray:
        return self.eigenvectors @ coefficients


class SpatialGraph:
    """Symmetric contiguity graph held as a sparse weight matrix W."""

    def __init__(self, weights: sparse.spmatrix) -> None:
        weights = sparse.csr_matrix(weights, dtype=float)
        weights.sum_duplicates()
        weights.eliminate_zeros()
        weights.sort_indices()

        n_rows, n_cols = weights.shape
        if n_rows != n_cols:
            raise InvalidArgumentError(
                f"weight matrix must be square, got {weights.shape}"
            )
        if n_rows < 2:
            raise InvalidArgumentError("a spatial graph needs at least two regions")
        if weights.data.size and weights.data.min() < 0:
            raise DataValidationError("contiguity weights must be non-negative")
        if weights.diagonal().any():
            raise DataValidationError("a region cannot be its own neighbor")
        if abs(weights - weights.T).max() > 0:
            raise DataValidationError("contiguity weights must be symmetric")

        row_sums = np.asarray(weights.sum(axis=1)).ravel()
        if isolated := np.flatnonzero(row_sums <= 0).tolist():
            raise DataValidationError(f"regions without neighbors: {isolated}")

        # symmetric non-negative W with zero diagonal makes D_w - W a graph
        # Laplacian, which is positive semidefinite
        self.weights = weights
        self.row_sums: FloatArray = row_sums

    @property
    def n_regions(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.weights.nnz // 2)

    @property
    def average_row_sum(self) -> float:
        return float(self.row_sums.mean())

    def neighbors(self, region: int) -> IntArray:
        start, end = self.weights.indptr[region : region + 2]
        return self.weights.indices[start:end].astype(np.int64)

    def degrees(self) -> IntArray:
        return np.diff(self.weights.indptr).astype(np.int64)

    @cached_property
    def car_conditional(self) -> CarConditional:
        normalized = sparse.diags(1.0 / self.row_sums) @ self.weights
        return CarConditional(
            cond_mean_weighting=sparse.csr_matrix(normalized), row_sum=self.row_sums
        )

    @cached_property
    def upper_edges(self) -> tuple[IntArray, IntArray, FloatArray]:
        upper = sparse.triu(self.weights, k=1).tocoo()
        return upper.row.astype(np.int64), upper.col.astype(np.int64), upper.data

    def precision_dense(self) -> FloatArray:
        """D_w - W as a dense array."""
        return np.diag(self.row_sums) - self.weights.toarray()

    @cached_property
    def car_spectrum(self) -> CarSpectrum:
        eigenvalues, eigenvectors = np.linalg.eigh(self.precision_dense())
        # one null mode per connected component
        eigenvalues[eigenvalues < NULL_EIGENVALUE_TOL * eigenvalues.max()] = 0.0

        return CarSpectrum(eigenvalues=eigenvalues, eigenvectors=eigenvectors)

    def permuted(self, order: IntArray) -> "SpatialGraph":
        order = np.asarray(order)
        return SpatialGraph(self.weights[order][:, order])

    @classmethod
    def from_edges(
        cls, n_regions: int, edges: list[tuple[int, int, float]]
    ) -> "SpatialGraph":
        rows = [i for i, j, _ in edges] + [j for i, j, _ in edges]
        cols = [j for i, j, _ in edges] + [i for i, j, _ in edges]
        data = [w for _, _, w in edges] * 2

        return cls(
            sparse.coo_matrix((data, (rows, cols)), shape=(n_regions, n_regions))
        )


def build_queen_grid(rows: int, cols: int) -> SpatialGraph:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InvalidArgumentError(f"a {rows}x{cols} grid has fewer than two cells")

    edges = []
    for r in range(rows):
        for c in range(cols):
            cell = r * cols + c
            # forward half of the 8-neighborhood so each pair appears once
            for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    edges.append((cell, nr * cols + nc, 1.0))

    return SpatialGraph.from_edges(rows * cols, edges)


def parse_grid(shorthand: str) -> tuple[int, int]:
    """'7x7' -> (7, 7)."""
    try:
        rows, cols = (int(part) for part in shorthand.lower().split("x"))
    except ValueError as exc:
        raise InvalidArgumentError(
            f"grid must look like RxC (for example 7x7), got {shorthand!r}"
        ) from exc

    return rows, cols


def _parse_region_count(raw_line: str, path: Path, line_number: int) -> int:
    value = raw_line[len(REGIONS_DIRECTIVE) :].strip()
    try:
        count = int(value)
    except ValueError as exc:
        raise FormatError(
            f"region count must be an integer, got {value!r}", path, line_number
        ) from exc

    if count < 1:
        raise FormatError(
            f"region count must be positive, got {count}", path, line_number
        )

    return count


def load_adjacency(path: Path | str, n_regions: int | None = None) -> SpatialGraph:
    """Read an edge list of `i j [weight]` lines with 0-based indices."""
    path = Path(path)
    seen: dict[tuple[int, int], tuple[float, int]] = {}

    with path.open() as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            if n_regions is None and raw_line.startswith(REGIONS_DIRECTIVE):
                n_regions = _parse_region_count(raw_line, path, line_number)
                continue

            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue

            parts = line.split()
            if len(parts) not in (2, 3):
                raise FormatError("expected `i j [weight]`", path, line_number)

            try:
                i, j = int(parts[0]), int(parts[1])
                weight = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise FormatError(f"cannot parse {line!r}", path, line_number) from exc

            if i < 0 or j < 0 or (n_regions is not None and max(i, j) >= n_regions):
                raise FormatError(
                    f"region index out of range in {line!r}", path, line_number
                )
            if i == j:
                raise FormatError(f"self-loop on region {i}", path, line_number)
            if weight <= 0:
                raise FormatError(f"non-positive weight {weight}", path, line_number)
            if (i, j) in seen:
                raise FormatError(
                    f"duplicate edge ({i}, {j}), first seen on line {seen[(i, j)][1]}",
                    path,
                    line_number,
                )

            if (reverse := seen.get((j, i))) is not None and reverse[0] != weight:
                raise FormatError(
                    f"asymmetric edge ({i}, {j}): weight {weight} vs {reverse[0]} "
                    f"on line {reverse[1]}",
                    path,
                    line_number,
                )

            seen[(i, j)] = (weight, line_number)

    if not seen:
        raise FormatError("no edges found", path)

    size = n_regions if n_regions is not None else max(max(edge) for edge in seen) + 1
    edges = [
        (i, j, weight)
        for (i, j), (weight, _) in seen.items()
        if (j, i) not in seen or i < j
    ]

    graph = SpatialGraph.from_edges(size, edges)
    logger.debug(
        f"Loaded {graph.n_edges} edges over {graph.n_regions} regions from {path}"
    )

    return graph


def write_adjacency(graph: SpatialGraph, path: Path | str) -> None:
    upper = sparse.triu(graph.weights, k=1).tocoo()
    lines = [f"{REGIONS_DIRECTIVE} {graph.n_regions}"]
    lines += [f"{i} {j} {w:g}" for i, j, w in zip(upper.row, upper.col, upper.data)]

    Path(path).write_text("\n".join(lines) + "\n")


def car_quadratic_form(graph: SpatialGraph, v: FloatArray) -> float:
    """v'(D_w - W)v evaluated as sum over i<j of w_ij (v_i - v_j)^2."""
    v = np.asarray(v, dtype=float)
    if v.shape != (graph.n_regions,):
        raise InvalidArgumentError(
            f"expected a vector of {graph.n_regions} values, got shape {v.shape}"
        )

    rows, cols, weights = graph.upper_edges
    return float(np.sum(weights * (v[rows] - v[cols]) ** 2))


def marginal_spatial_sd(sigma_v: float, graph: SpatialGraph) -> float:
    if sigma_v <= 0:
        raise InvalidArgumentError(f"sigma_v must be positive, got {sigma_v}")

    return sigma_v / (MARGINAL_SD_FACTOR * graph.average_row_sum)


def spatial_lag(graph: SpatialGraph, values: FloatArray) -> FloatArray:
    """sum_j w_ij z_j along the leading (region) axis, raw weights."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != graph.n_regions:
        raise InvalidArgumentError(
            f"expected {graph.n_regions} regions on axis 0, got {values.shape[0]}"
        )

    flat = values.reshape(graph.n_regions, -1)
    return np.asarray(graph.weights @ flat).reshape(values.shape)
