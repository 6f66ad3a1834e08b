"""Dynamic time warping between 1-D series and the pairwise distance matrix.

The cumulative-cost recursion optimizes the un-normalized sum of squared
local costs over all valid warping paths; the reported distance divides the
optimal path's cost by the path length K. ``normalized=False`` returns the
raw cumulative optimum instead. Backtracking ties prefer the diagonal step,
then the vertical, then the horizontal, so paths are deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DtwError(ValueError):
    """Invalid input to a DTW computation."""


def local_cost(a: float, b: float) -> float:
    """Squared difference between two latent values."""
    return (a - b) ** 2


def cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Local cost D(k, l) for every index pair."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return (a[:, None] - b[None, :]) ** 2


def cumulative_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cumulative cost matrix from the DTW recursion (for inspection)."""
    gamma, _ = _dtw_core(np.asarray(a, float).ravel(), np.asarray(b, float).ravel())
    return np.asarray(gamma)


def _dtw_core(a: np.ndarray, b: np.ndarray) -> tuple[list[list[float]], list[tuple[int, int]]]:
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        raise DtwError("series must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DtwError("series must be finite")

    d = cost_matrix(a, b).tolist()

    # Border cells only have one valid predecessor; Gamma(0, 0) = D(0, 0).
    gamma: list[list[float]] = []
    first = d[0]
    row = [first[0]]
    for l in range(1, m):
        row.append(first[l] + row[l - 1])
    gamma.append(row)
    for k in range(1, n):
        dk = d[k]
        prev = gamma[k - 1]
        row = [dk[0] + prev[0]]
        for l in range(1, m):
            up_left = prev[l - 1]
            up = prev[l]
            left = row[l - 1]
            best = up_left if up_left <= up else up
            if left < best:
                best = left
            row.append(dk[l] + best)
        gamma.append(row)

    # Backtrack from the terminal cell; prefer diagonal, then vertical, then
    # horizontal on ties.
    path = [(n - 1, m - 1)]
    k, l = n - 1, m - 1
    while k > 0 or l > 0:
        if k == 0:
            l -= 1
        elif l == 0:
            k -= 1
        else:
            diag = gamma[k - 1][l - 1]
            up = gamma[k - 1][l]
            left = gamma[k][l - 1]
            if diag <= up and diag <= left:
                k, l = k - 1, l - 1
            elif up <= left:
                k -= 1
            else:
                l -= 1
        path.append((k, l))
    path.reverse()
    return gamma, path


def dtw_distance(
    a: np.ndarray,
    b: np.ndarray,
    normalized: bool = True,
) -> tuple[float, list[tuple[int, int]]]:
    """Optimal warping cost and path between two 1-D series.

    Returns ``(cost, path)`` where path is a list of 0-based index pairs from
    (0, 0) to (len(a)-1, len(b)-1). With ``normalized=True`` (default) the
    cost is the optimal cumulative cost divided by the path length.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    gamma, path = _dtw_core(a, b)
    raw = gamma[-1][-1]
    if normalized:
        return raw / len(path), path
    return raw, path


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distance matrix with optional display ordering."""

    labels: list[str]
    values: np.ndarray  # (N, N) float64
    ordering: np.ndarray | None = None  # permutation of 0..N-1

    @property
    def n(self) -> int:
        return len(self.labels)

    def validate(self) -> None:
        n = self.n
        if self.values.shape != (n, n):
            raise DtwError(f"matrix shape {self.values.shape} != {(n, n)}")
        if not np.all(np.isfinite(self.values)):
            raise DtwError("matrix entries must be finite")
        if np.any(self.values < 0):
            raise DtwError("matrix entries must be >= 0")
        if np.any(np.diag(self.values) != 0):
            raise DtwError("matrix diagonal must be zero")
        if not np.array_equal(self.values, self.values.T):
            raise DtwError("matrix must be symmetric")
        if self.ordering is not None and sorted(self.ordering.tolist()) != list(range(n)):
            raise DtwError("ordering must be a permutation of 0..N-1")

    def reordered(self) -> "DistanceMatrix":
        """The matrix with rows/columns permuted to the stored ordering."""
        if self.ordering is None:
            raise DtwError("no ordering attached")
        p = self.ordering
        return DistanceMatrix(
            labels=[self.labels[i] for i in p],
            values=self.values[np.ix_(p, p)],
        )


def pairwise_matrix(
    series,
    labels: list[str] | None = None,
    normalized: bool = True,
) -> DistanceMatrix:
    """DTW distance between every unordered pair of series.

    Accepts an (N, J) array, an (N, J, 1) latent grid, or a labeled latent
    series object. Each pair is computed once and mirrored, so the matrix is
    exactly symmetric with a zero diagonal.
    """
    if labels is None:
        companies = getattr(series, "companies", None)
        if companies is not None:
            labels = [str(c) for c in companies]
    z = np.asarray(getattr(series, "z", series), dtype=float)
    if z.ndim == 3:  # (N, J, 1) latent grid
        z = z[:, :, 0]
    if z.ndim != 2:
        raise DtwError(f"expected (N, J) series, got shape {z.shape}")
    n = z.shape[0]
    if n < 2:
        raise DtwError("need at least two series")
    if labels is None:
        labels = [f"series_{i}" for i in range(n)]
    if len(labels) != n:
        raise DtwError("labels length must match series count")

    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            cost, _ = dtw_distance(z[i], z[j], normalized=normalized)
            values[i, j] = cost
            values[j, i] = cost
    matrix = DistanceMatrix(labels=list(labels), values=values)
    matrix.validate()
    return matrix


def write_distance_matrix(matrix: DistanceMatrix, path: str | Path) -> None:
    """Square table with company labels on both the header row and column."""
    matrix.validate()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company", *matrix.labels])
        for label, row in zip(matrix.labels, matrix.values):
            writer.writerow([label, *(format(v, ".17g") for v in row)])


def read_distance_matrix(path: str | Path) -> DistanceMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["company"]:
        raise DtwError(f"unexpected distance matrix header in {path}")
    labels = rows[0][1:]
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    if [row[0] for row in rows[1:]] != labels:
        raise DtwError(f"row labels do not match column labels in {path}")
    matrix = DistanceMatrix(labels=labels, values=values)
    matrix.validate()
    return matrix
