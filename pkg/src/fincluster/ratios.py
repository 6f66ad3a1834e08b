"""Seven financial ratios per (company, quarter) cell, plus standardization.

Ratios are stored in percent. Degenerate denominators yield 0 rather than an
error: a missing quarter is recorded as zero in the panel and stays zero here,
carrying the panel's observed mask for downstream interpretation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .panel import CompanyPanel, Quarter

#: Ratio features, in canonical order.
FEATURES = (
    "market_share",
    "claims_paid_ratio",
    "loss_ratio",
    "underwriting_profit_ratio",
    "expense_ratio",
    "combined_ratio",
    "claims_payout_ratio",
)


class ScalingError(ValueError):
    """Scaling spec does not match the tensor it is applied to."""


@dataclass
class RatioTensor:
    """N x J x 7 ratio grid over the panel's companies and periods."""

    companies: list[str]
    periods: list[Quarter]
    values: np.ndarray  # (N, J, len(FEATURES)) float64

    @property
    def n_companies(self) -> int:
        return len(self.companies)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def feature(self, name: str) -> np.ndarray:
        return self.values[:, :, FEATURES.index(name)]


@dataclass
class ScalingSpec:
    """Fitted standardization parameters.

    ``within_company`` mode keeps one (mean, std) per company and feature;
    ``global`` mode keeps one per feature. Population standard deviation.
    """

    mode: str  # "within_company" | "global"
    mean: np.ndarray  # (N, F) or (F,)
    std: np.ndarray
    companies: list[str]
    features: tuple[str, ...] = FEATURES


def compute_expenses(
    gross_premium_income: float | np.ndarray,
    claims_incurred: float | np.ndarray,
    underwriting_profit: float | np.ndarray,
):
    """Operating expenses implied by premium income, claims, and profit."""
    return gross_premium_income - (claims_incurred + underwriting_profit)


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    """numerator/denominator * 100, defined as 0 where the denominator is 0."""
    out = np.zeros_like(numerator, dtype=float)
    np.divide(numerator, denominator, out=out, where=denominator != 0)
    return out * 100.0


def compute_ratios(panel: CompanyPanel) -> RatioTensor:
    """The seven ratios, in percent, for every panel cell.

    Market share divides by the summed premium of all loaded companies at the
    same quarter. Extreme values are retained unclipped.
    """
    panel.validate()
    gpi = panel.metric("gross_premium_income")
    paid = panel.metric("claims_paid")
    incurred = panel.metric("claims_incurred")
    uw_profit = panel.metric("underwriting_profit")

    total_premium = gpi.sum(axis=0, keepdims=True)  # (1, J)
    market_share = _ratio(gpi, np.broadcast_to(total_premium, gpi.shape))
    claims_paid_ratio = _ratio(paid, gpi)
    loss_ratio = _ratio(incurred, gpi)
    uw_profit_ratio = _ratio(uw_profit, gpi)
    expense_ratio = _ratio(compute_expenses(gpi, incurred, uw_profit), gpi)
    combined_ratio = loss_ratio + expense_ratio
    claims_payout_ratio = _ratio(paid, incurred)

    values = np.stack(
        [
            market_share,
            claims_paid_ratio,
            loss_ratio,
            uw_profit_ratio,
            expense_ratio,
            combined_ratio,
            claims_payout_ratio,
        ],
        axis=2,
    )
    return RatioTensor(list(panel.companies), list(panel.periods), values)


def fit_scaling(tensor: RatioTensor, mode: str = "within_company") -> ScalingSpec:
    """Fit standardization parameters over the time axis.

    within_company: one (mean, std) per (company, feature) over the J cells.
    global: one per feature over all N*J cells.
    """
    if not np.all(np.isfinite(tensor.values)):
        raise ScalingError("tensor must be finite")
    if mode == "within_company":
        mean = tensor.values.mean(axis=1)  # (N, F)
        std = tensor.values.std(axis=1)
    elif mode == "global":
        mean = tensor.values.mean(axis=(0, 1))  # (F,)
        std = tensor.values.std(axis=(0, 1))
    else:
        raise ScalingError(f"unknown scaling mode {mode!r}")
    return ScalingSpec(mode=mode, mean=mean, std=std, companies=list(tensor.companies))


def _check_spec(tensor: RatioTensor, spec: ScalingSpec) -> tuple[np.ndarray, np.ndarray]:
    if tuple(spec.features) != FEATURES:
        raise ScalingError("feature order mismatch between spec and tensor")
    if spec.mode == "within_company":
        if spec.companies != tensor.companies:
            raise ScalingError("company list mismatch between spec and tensor")
        expected = (tensor.n_companies, len(FEATURES))
        if spec.mean.shape != expected or spec.std.shape != expected:
            raise ScalingError(f"spec shape {spec.mean.shape} != {expected}")
        return spec.mean[:, None, :], spec.std[:, None, :]
    if spec.mode == "global":
        expected = (len(FEATURES),)
        if spec.mean.shape != expected or spec.std.shape != expected:
            raise ScalingError(f"spec shape {spec.mean.shape} != {expected}")
        return spec.mean[None, None, :], spec.std[None, None, :]
    raise ScalingError(f"unknown scaling mode {spec.mode!r}")


def apply_scaling(tensor: RatioTensor, spec: ScalingSpec) -> RatioTensor:
    """Standardize: (value - mean) / std, with zero-variance features mapped to 0."""
    mean, std = _check_spec(tensor, spec)
    centered = tensor.values - mean
    scaled = np.zeros_like(centered)
    np.divide(centered, np.broadcast_to(std, centered.shape), out=scaled, where=std != 0)
    return RatioTensor(list(tensor.companies), list(tensor.periods), scaled)


def invert_scaling(tensor: RatioTensor, spec: ScalingSpec) -> RatioTensor:
    """Undo :func:`apply_scaling`: value * std + mean."""
    mean, std = _check_spec(tensor, spec)
    return RatioTensor(
        list(tensor.companies),
        list(tensor.periods),
        tensor.values * std + mean,
    )


def write_ratio_table(tensor: RatioTensor, path: str | Path) -> None:
    """Long-format export: one row per (company, period, feature)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company", "year", "quarter", "feature", "value"])
        for i, company in enumerate(tensor.companies):
            for j, period in enumerate(tensor.periods):
                for k, feature in enumerate(FEATURES):
                    writer.writerow(
                        [company, period.year, period.quarter, feature,
                         format(tensor.values[i, j, k], ".17g")]
                    )


def read_ratio_table(path: str | Path) -> RatioTensor:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0] != ["company", "year", "quarter", "feature", "value"]:
        raise ScalingError(f"unexpected ratio table header in {path}")
    companies: list[str] = []
    period_indices: set[int] = set()
    entries: dict[tuple[str, int, str], float] = {}
    for company, year, quarter, feature, value in rows[1:]:
        if company not in companies:
            companies.append(company)
        idx = Quarter(int(year), int(quarter)).index
        period_indices.add(idx)
        entries[(company, idx, feature)] = float(value)
    first, last = min(period_indices), max(period_indices)
    periods = [Quarter.from_index(i) for i in range(first, last + 1)]
    values = np.zeros((len(companies), len(periods), len(FEATURES)))
    for (company, idx, feature), value in entries.items():
        values[companies.index(company), idx - first, FEATURES.index(feature)] = value
    return RatioTensor(companies, periods, values)


def write_scaling(spec: ScalingSpec, path: str | Path) -> None:
    payload = {
        "mode": spec.mode,
        "features": list(spec.features),
        "companies": spec.companies,
        "mean": spec.mean.tolist(),
        "std": spec.std.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def read_scaling(path: str | Path) -> ScalingSpec:
    payload = json.loads(Path(path).read_text())
    return ScalingSpec(
        mode=payload["mode"],
        mean=np.asarray(payload["mean"], dtype=float),
        std=np.asarray(payload["std"], dtype=float),
        companies=list(payload["companies"]),
        features=tuple(payload["features"]),
    )
