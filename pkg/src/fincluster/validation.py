"""Cluster validation: silhouette scores and elbow distortion curves.

Silhouette is computed at company level over the DTW distance matrix; the
elbow distortion sums squared per-period deviations of each latent series
from its cluster's barycenter series.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import (
    ClusterAssignment,
    cut_dendrogram,
    dba_barycenter,
    hierarchical_complete,
    kmeans_dtw,
    _medoid,
)
from .dtw import DistanceMatrix


class ValidationError(ValueError):
    """Invalid validation request."""


def silhouette_samples(matrix: DistanceMatrix, labels: np.ndarray) -> np.ndarray:
    """Per-company silhouette s = (b - a) / max(a, b).

    a is the mean distance to same-cluster companies (excluding self); b is
    the smallest mean distance to any other cluster. Singleton-cluster
    companies score 0.
    """
    labels = np.asarray(labels, dtype=int)
    d = matrix.values
    n = d.shape[0]
    if labels.shape != (n,):
        raise ValidationError(f"labels shape {labels.shape} does not match N={n}")
    cluster_ids = np.unique(labels)
    scores = np.zeros(n)
    for i in range(n):
        same = np.flatnonzero((labels == labels[i]) & (np.arange(n) != i))
        if same.size == 0:
            continue  # singleton convention: s = 0
        a = d[i, same].mean()
        b = min(
            d[i, labels == c].mean() for c in cluster_ids if c != labels[i]
        )
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return scores


def silhouette_mean(matrix: DistanceMatrix, labels: np.ndarray) -> float:
    """Mean silhouette over companies; rejects a single-cluster labeling."""
    labels = np.asarray(labels, dtype=int)
    if np.unique(labels).size < 2:
        raise ValidationError("silhouette is undefined for a single cluster")
    return float(silhouette_samples(matrix, labels).mean())


def elbow_distortion(
    series,
    labels: np.ndarray,
    centers: np.ndarray,
) -> float:
    """Total within-cluster squared deviation from the cluster center series."""
    z = np.asarray(getattr(series, "z", series), dtype=float)
    if z.ndim == 3:
        z = z[:, :, 0]
    labels = np.asarray(labels, dtype=int)
    centers = np.asarray(centers, dtype=float)
    if centers.shape[0] <= labels.max():
        raise ValidationError("fewer centers than cluster labels")
    residual = z - centers[labels]
    return float(np.sum(residual**2))


@dataclass
class ValidationCurve:
    """Silhouette and distortion per candidate cluster count."""

    ms: list[int]
    silhouettes: list[float]
    distortions: list[float]
    method: str
    seed: int


def _hierarchical_centers(
    z: np.ndarray,
    assignment: ClusterAssignment,
    pair: np.ndarray,
    barycenter_iters: int,
) -> np.ndarray:
    centers = np.zeros((assignment.m, z.shape[1]))
    for k in range(assignment.m):
        member_idx = assignment.members(k)
        init = z[_medoid(member_idx, pair)]
        centers[k] = dba_barycenter(z[member_idx], init, iters=barycenter_iters)
    return centers


def validation_sweep(
    series,
    matrix: DistanceMatrix,
    m_values: list[int] | range,
    method: str = "kmeans_dtw",
    seed: int = 0,
    max_iter: int = 50,
    barycenter_iters: int = 10,
) -> ValidationCurve:
    """Run the chosen clustering for each candidate m and record the mean
    silhouette and elbow distortion. Deterministic given the seed."""
    z = np.asarray(getattr(series, "z", series), dtype=float)
    if z.ndim == 3:
        z = z[:, :, 0]
    n = z.shape[0]
    ms = [int(m) for m in m_values]
    if not ms:
        raise ValidationError("empty m range")
    if min(ms) < 2 or max(ms) > n:
        raise ValidationError(f"m range {ms} outside [2, {n}]")

    dend = hierarchical_complete(matrix) if method == "hierarchical_complete" else None

    silhouettes: list[float] = []
    distortions: list[float] = []
    for m in ms:
        if method == "kmeans_dtw":
            child_seed = int(np.random.SeedSequence((seed, m)).generate_state(1)[0])
            assignment, centers = kmeans_dtw(
                z,
                m,
                seed=child_seed,
                max_iter=max_iter,
                barycenter_iters=barycenter_iters,
                distances=matrix,
            )
        elif method == "hierarchical_complete":
            assignment = cut_dendrogram(dend, m)
            centers = _hierarchical_centers(z, assignment, matrix.values, barycenter_iters)
        else:
            raise ValidationError(f"unknown method {method!r}")
        silhouettes.append(silhouette_mean(matrix, assignment.labels))
        distortions.append(elbow_distortion(z, assignment.labels, centers))
    return ValidationCurve(ms=ms, silhouettes=silhouettes, distortions=distortions,
                           method=method, seed=seed)


@dataclass
class SelectionReport:
    """Chosen cluster count plus the evidence behind the choice."""

    chosen_m: int
    silhouette: float
    distortion: float
    rule: str
    evidence: dict = field(default_factory=dict)


def select_m(
    curve: ValidationCurve,
    distortion_drop_frac: float = 0.1,
    silhouette_frac: float = 0.9,
) -> SelectionReport:
    """Default decision rule (configuration, not a fixed fact): the largest m
    whose incoming distortion decrease falls below ``distortion_drop_frac``
    of the initial decrease, intersected with m whose silhouette is at least
    ``silhouette_frac`` of the maximum. Falls back to the silhouette argmax
    when the intersection is empty."""
    ms = curve.ms
    sil = np.asarray(curve.silhouettes)
    dist = np.asarray(curve.distortions)
    if len(ms) < 2:
        chosen = ms[0]
        rule = "single-candidate"
        evidence = {}
    else:
        drops = dist[:-1] - dist[1:]
        initial = drops[0]
        flat = {ms[i + 1] for i, drop in enumerate(drops) if drop < distortion_drop_frac * initial}
        good_sil = {m for m, s in zip(ms, sil) if s >= silhouette_frac * sil.max()}
        candidates = sorted(flat & good_sil)
        if candidates:
            chosen = candidates[-1]
            rule = "elbow-and-silhouette"
        else:
            chosen = ms[int(np.argmax(sil))]
            rule = "silhouette-argmax-fallback"
        evidence = {
            "initial_drop": float(initial),
            "drop_threshold": float(distortion_drop_frac * initial),
            "flat_candidates": sorted(flat),
            "silhouette_candidates": sorted(good_sil),
        }
    at = ms.index(chosen)
    return SelectionReport(
        chosen_m=chosen,
        silhouette=float(sil[at]),
        distortion=float(dist[at]),
        rule=rule,
        evidence=evidence,
    )


def write_validation_curve(curve: ValidationCurve, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "silhouette", "distortion"])
        for m, s, v in zip(curve.ms, curve.silhouettes, curve.distortions):
            writer.writerow([m, format(s, ".17g"), format(v, ".17g")])


def read_validation_curve(path: str | Path, method: str = "", seed: int = 0) -> ValidationCurve:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["m", "silhouette", "distortion"]:
        raise ValidationError(f"unexpected validation curve header in {path}")
    ms = [int(r[0]) for r in rows[1:]]
    silhouettes = [float(r[1]) for r in rows[1:]]
    distortions = [float(r[2]) for r in rows[1:]]
    return ValidationCurve(ms, silhouettes, distortions, method=method, seed=seed)


def write_selection(report: SelectionReport, path: str | Path, extra: dict | None = None) -> None:
    payload = {
        "chosen_m": report.chosen_m,
        "silhouette": report.silhouette,
        "distortion": report.distortion,
        "rule": report.rule,
        "evidence": report.evidence,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2))
