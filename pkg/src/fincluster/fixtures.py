"""Synthetic data generators for demos, smoke runs, and tests."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .panel import METRICS, Quarter


def synthetic_source_rows(
    n_companies: int = 8,
    n_quarters: int = 12,
    seed: int = 0,
    start: Quarter = Quarter(2013, 1),
    missing_rate: float = 0.1,
) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a plausible quarterly source table.

    Some (company, quarter) rows are dropped entirely and some optional
    fields are blanked to exercise the missing-data policy.
    """
    rng = np.random.default_rng(seed)
    header = ["company", "year", "quarter", *METRICS]
    companies = [f"INS-{chr(65 + i)}" for i in range(n_companies)]
    base_premium = rng.uniform(5e4, 5e5, size=n_companies)
    rows: list[list[str]] = []
    for i, company in enumerate(companies):
        drift = rng.uniform(0.98, 1.04)
        for q in range(n_quarters):
            if rng.random() < missing_rate and q not in (0, n_quarters - 1):
                continue  # whole quarter unreported
            period = Quarter.from_index(start.index + q)
            gpi = base_premium[i] * drift**q * rng.uniform(0.85, 1.15)
            incurred = gpi * rng.uniform(0.55, 0.8)
            paid = incurred * rng.uniform(0.6, 0.95)
            uw_profit = gpi * rng.uniform(-0.05, 0.15)
            nep = gpi * rng.uniform(0.7, 0.95)
            new_policies = float(rng.integers(50, 2000))
            total_policies = float(rng.integers(2000, 50000))
            record = [
                company,
                str(period.year),
                str(period.quarter),
                f"{gpi:.2f}",
                f"{paid:.2f}",
                f"{incurred:.2f}",
                f"{uw_profit:.2f}",
                f"{nep:.2f}",
                f"{new_policies:.0f}",
                f"{total_policies:.0f}",
            ]
            if rng.random() < missing_rate:
                record[8] = ""  # blank an optional field
            rows.append(record)
    return header, rows


def write_synthetic_source(
    path: str | Path,
    n_companies: int = 8,
    n_quarters: int = 12,
    seed: int = 0,
    delimiter: str = ",",
    missing_rate: float = 0.1,
) -> Path:
    """Write a synthetic source table; returns the path."""
    header, rows = synthetic_source_rows(
        n_companies=n_companies, n_quarters=n_quarters, seed=seed, missing_rate=missing_rate
    )
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def sinusoid_mixture_tensor(
    n_companies: int = 12,
    n_periods: int = 20,
    n_features: int = 7,
    seed: int = 0,
    noise: float = 0.05,
) -> np.ndarray:
    """Standardized-scale tensor driven by one sinusoid per company.

    Every feature is the shared loading times a company-specific sinusoid
    plus noise, so a 1-D bottleneck can reconstruct it well.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_periods)
    loadings = rng.uniform(0.5, 1.5, size=n_features)
    tensor = np.empty((n_companies, n_periods, n_features))
    for i in range(n_companies):
        freq = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0, 2 * np.pi)
        signal = np.sin(2 * np.pi * freq * t / n_periods + phase)
        tensor[i] = signal[:, None] * loadings[None, :]
    tensor += noise * rng.standard_normal(tensor.shape)
    return tensor


def planted_latent_clusters(
    n_clusters: int = 4,
    members_per_cluster: int = 4,
    n_periods: int = 12,
    amplitude: float = 2.0,
    spread: float = 0.3,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Latent series with a planted partition.

    Cluster prototypes are sinusoids with distinct frequencies and phases so
    every prototype pair is roughly equally far apart (no nested structure);
    members add noise of scale ``spread``. With the defaults the smallest
    inter-prototype DTW distance is well over five times the within-cluster
    spread. Returns (series (N, J), true labels).
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_periods)
    series = []
    labels = []
    for k in range(n_clusters):
        prototype = amplitude * np.sin(2 * np.pi * (k + 1) * t / n_periods + k * np.pi / 3)
        for _ in range(members_per_cluster):
            series.append(prototype + spread * rng.standard_normal(n_periods))
            labels.append(k)
    return np.asarray(series), np.asarray(labels, dtype=int)
