"""Partitioning of latent series: DTW K-Means and complete-linkage hierarchy.

K-Means alternates DTW nearest-center assignment with barycenter averaging.
A center update is kept only if it does not increase its cluster's summed
DTW distance, which makes the recorded inertia non-increasing by
construction. All ties break toward the lowest index for reproducibility.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dtw import DistanceMatrix, dtw_distance, pairwise_matrix


class ClusterError(ValueError):
    """Invalid clustering request."""


@dataclass
class ClusterAssignment:
    """Cluster labels for N series, 0..m-1, every label used at least once."""

    m: int
    labels: np.ndarray  # (N,) int
    method: str  # "kmeans_dtw" | "hierarchical_complete"
    seed: int | None = None
    inertia_history: list[float] | None = None

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


@dataclass
class Dendrogram:
    """Merge table of an agglomerative clustering.

    ``merges`` has one row per merge: (left node, right node, height, size).
    Leaves are nodes 0..N-1; merge row i creates node N+i. Left is always
    the child holding the smaller minimum original label. Heights are
    non-decreasing under complete linkage.
    """

    n_leaves: int
    merges: np.ndarray  # (N-1, 4) float64

    def children(self, node: int) -> tuple[int, int]:
        row = self.merges[node - self.n_leaves]
        return int(row[0]), int(row[1])

    @property
    def leaf_order(self) -> np.ndarray:
        return leaf_ordering(self)


def dba_barycenter(
    members: np.ndarray,
    init: np.ndarray,
    iters: int = 10,
    normalized: bool = True,
) -> np.ndarray:
    """Barycenter averaging: align members to the current barycenter and
    replace each coordinate with the mean of the values aligned to it."""
    members = np.asarray(members, dtype=float)
    if members.ndim == 1:
        members = members[None, :]
    if members.shape[0] == 0:
        raise ClusterError("barycenter needs at least one member")
    bary = np.asarray(init, dtype=float).copy()
    for _ in range(iters):
        sums = np.zeros_like(bary)
        counts = np.zeros_like(bary)
        for series in members:
            _, path = dtw_distance(bary, series, normalized=normalized)
            for k, l in path:
                sums[k] += series[l]
                counts[k] += 1.0
        updated = sums / counts  # boundary + continuity guarantee counts >= 1
        if np.array_equal(updated, bary):
            break
        bary = updated
    return bary


def _medoid(member_idx: np.ndarray, distances: np.ndarray) -> int:
    """Member with minimal summed DTW distance to the other members."""
    sub = distances[np.ix_(member_idx, member_idx)]
    return int(member_idx[int(np.argmin(sub.sum(axis=1)))])


def _init_centers(distances: np.ndarray, m: int, rng: np.random.Generator) -> list[int]:
    """Seeded distance-weighted sampling (farthest-point flavored)."""
    n = distances.shape[0]
    chosen = [int(rng.integers(n))]
    while len(chosen) < m:
        nearest = np.min(distances[:, chosen], axis=1)
        weights = nearest**2
        weights[chosen] = 0.0
        total = weights.sum()
        if total <= 0:
            remaining = [i for i in range(n) if i not in chosen]
            chosen.append(remaining[0])
        else:
            chosen.append(int(rng.choice(n, p=weights / total)))
    return chosen


def kmeans_dtw(
    series,
    m: int,
    seed: int = 0,
    max_iter: int = 50,
    barycenter_iters: int = 10,
    distances: DistanceMatrix | None = None,
    normalized: bool = True,
) -> tuple[ClusterAssignment, np.ndarray]:
    """Partition N series into m clusters under the DTW metric.

    Returns the assignment (with its inertia history) and the (m, J) array
    of cluster barycenters. Deterministic given the seed.
    """
    z = np.asarray(getattr(series, "z", series), dtype=float)
    if z.ndim == 3:
        z = z[:, :, 0]
    n = z.shape[0]
    if not 2 <= m <= n:
        raise ClusterError(f"cluster count m={m} out of range 2..{n}")

    if distances is None:
        distances = pairwise_matrix(z, normalized=normalized)
    pair = distances.values

    rng = np.random.default_rng(seed)
    centers = z[_init_centers(pair, m, rng)].copy()

    labels = np.full(n, -1, dtype=int)
    inertia_history: list[float] = []
    for _ in range(max_iter):
        dist_to_center = np.empty((n, m))
        for i in range(n):
            for k in range(m):
                dist_to_center[i, k], _ = dtw_distance(z[i], centers[k], normalized=normalized)
        new_labels = np.argmin(dist_to_center, axis=1)

        # Re-seed any empty cluster with the company farthest from its own
        # center, restricted to donor clusters that keep at least one member.
        for k in range(m):
            if np.any(new_labels == k):
                continue
            own = dist_to_center[np.arange(n), new_labels].copy()
            sizes = np.bincount(new_labels, minlength=m)
            own[sizes[new_labels] < 2] = -np.inf
            farthest = int(np.argmax(own))
            new_labels[farthest] = k
            centers[k] = z[farthest].copy()
            dist_to_center[farthest, k] = 0.0

        inertia = float(dist_to_center[np.arange(n), new_labels].sum())
        inertia_history.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

        for k in range(m):
            member_idx = np.flatnonzero(labels == k)
            members = z[member_idx]
            init = z[_medoid(member_idx, pair)]
            candidate = dba_barycenter(members, init, iters=barycenter_iters, normalized=normalized)
            current_sum = dist_to_center[member_idx, k].sum()
            candidate_sum = sum(
                dtw_distance(s, candidate, normalized=normalized)[0] for s in members
            )
            if candidate_sum <= current_sum:
                centers[k] = candidate

    assignment = ClusterAssignment(
        m=m, labels=labels, method="kmeans_dtw", seed=seed, inertia_history=inertia_history
    )
    return assignment, centers


def hierarchical_complete(matrix: DistanceMatrix | np.ndarray) -> Dendrogram:
    """Agglomerative clustering where the distance between clusters is the
    maximum pairwise member distance; merges the closest pair each step.

    Ties break toward the pair with the lowest (min label, max label) of the
    clusters' minimum original member labels.
    """
    if isinstance(matrix, DistanceMatrix):
        matrix.validate()
        d0 = matrix.values
    else:
        d0 = np.asarray(matrix, dtype=float)
        if d0.ndim != 2 or d0.shape[0] != d0.shape[1]:
            raise ClusterError(f"expected square matrix, got shape {d0.shape}")
        if np.any(np.diag(d0) != 0):
            raise ClusterError("matrix diagonal must be zero")
        if not np.array_equal(d0, d0.T):
            raise ClusterError("matrix must be symmetric")

    n = d0.shape[0]
    if n < 2:
        raise ClusterError("need at least two items")

    # Active clusters: node id -> (min original label, size). Complete-linkage
    # distances maintained incrementally: d(new, other) = max(d(a), d(b)).
    active: dict[int, tuple[int, int]] = {i: (i, 1) for i in range(n)}
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = float(d0[i, j])

    merges = np.zeros((n - 1, 4))
    for step in range(n - 1):
        best_key = None
        best_pair = None
        for (a, b), d in dist.items():
            la, lb = active[a][0], active[b][0]
            key = (d, min(la, lb), max(la, lb))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (a, b)
        a, b = best_pair
        if active[a][0] > active[b][0]:
            a, b = b, a
        new_id = n + step
        size = active[a][1] + active[b][1]
        merges[step] = (a, b, best_key[0], size)

        others = [c for c in active if c not in (a, b)]
        for c in others:
            da = dist[(min(a, c), max(a, c))]
            db = dist[(min(b, c), max(b, c))]
            dist[(c, new_id)] = max(da, db)
        for c in (a, b):
            for other in list(active):
                key = (min(c, other), max(c, other))
                dist.pop(key, None)
        active[new_id] = (min(active[a][0], active[b][0]), size)
        del active[a], active[b]

    return Dendrogram(n_leaves=n, merges=merges)


def leaf_ordering(dend: Dendrogram) -> np.ndarray:
    """In-order traversal of the merge tree: left subtree first, where left
    holds the smaller minimum original label."""
    order: list[int] = []
    stack = [dend.n_leaves + len(dend.merges) - 1]
    while stack:
        node = stack.pop()
        if node < dend.n_leaves:
            order.append(node)
        else:
            left, right = dend.children(node)
            stack.append(right)
            stack.append(left)
    return np.asarray(order, dtype=int)


def cut_dendrogram(dend: Dendrogram, m: int) -> ClusterAssignment:
    """Undo the last m-1 merges; the connected components are the clusters.

    Labels are assigned 0..m-1 in order of first appearance along the leaf
    ordering.
    """
    n = dend.n_leaves
    if not 1 <= m <= n:
        raise ClusterError(f"cluster count m={m} out of range 1..{n}")

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    leaves_of: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step in range(n - m):
        left, right, _, _ = dend.merges[step]
        leaves = leaves_of.pop(int(left)) + leaves_of.pop(int(right))
        root = find(leaves[0])
        for leaf in leaves[1:]:
            parent[find(leaf)] = root
        leaves_of[n + step] = leaves

    labels = np.full(n, -1, dtype=int)
    next_label = 0
    for leaf in leaf_ordering(dend):
        component = find(int(leaf))
        if labels[component] == -1:
            labels[component] = next_label
            next_label += 1
    result = np.array([labels[find(i)] for i in range(n)], dtype=int)
    return ClusterAssignment(m=m, labels=result, method="hierarchical_complete")


def write_dendrogram(dend: Dendrogram, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["left", "right", "height", "size"])
        for left, right, height, size in dend.merges:
            writer.writerow([int(left), int(right), format(height, ".17g"), int(size)])


def read_dendrogram(path: str | Path, n_leaves: int | None = None) -> Dendrogram:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["left", "right", "height", "size"]:
        raise ClusterError(f"unexpected dendrogram header in {path}")
    merges = np.array(
        [[float(l), float(r), float(h), float(s)] for l, r, h, s in rows[1:]]
    )
    return Dendrogram(n_leaves=n_leaves or len(merges) + 1, merges=merges)
