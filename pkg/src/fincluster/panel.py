"""Quarterly financial panel: loading, validation, and the canonical cell grid.

A panel is a rectangular company x quarter grid. Source tables may have gaps;
after loading, every company covers the full union span of quarters and any
cell the source never reported is zero-filled with ``observed=False``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Raw metric fields, in canonical column order.
METRICS = (
    "gross_premium_income",
    "claims_paid",
    "claims_incurred",
    "underwriting_profit",
    "net_earned_premium",
    "new_policies",
    "total_policies",
)

#: Metrics that must be non-negative when present.
_NON_NEGATIVE = {
    "gross_premium_income",
    "claims_paid",
    "new_policies",
    "total_policies",
}


class PanelError(ValueError):
    """Source data violates the panel contract."""


@dataclass(frozen=True, order=True)
class Quarter:
    """A calendar quarter, totally ordered by (year, quarter)."""

    year: int
    quarter: int

    def __post_init__(self):
        if self.quarter not in (1, 2, 3, 4):
            raise PanelError(f"quarter must be in 1..4, got {self.quarter!r}")

    @property
    def index(self) -> int:
        return self.year * 4 + (self.quarter - 1)

    @classmethod
    def from_index(cls, index: int) -> "Quarter":
        return cls(index // 4, index % 4 + 1)

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"


def quarter_span(first: Quarter, last: Quarter) -> list[Quarter]:
    """All quarters from ``first`` to ``last`` inclusive, gap-free."""
    if last < first:
        raise PanelError(f"span end {last} precedes start {first}")
    return [Quarter.from_index(i) for i in range(first.index, last.index + 1)]


@dataclass(frozen=True)
class RawRecord:
    """One source row: a company's raw metrics for one quarter.

    ``None`` marks a metric the source did not report.
    """

    company: str
    period: Quarter
    gross_premium_income: float | None = None
    claims_paid: float | None = None
    claims_incurred: float | None = None
    underwriting_profit: float | None = None
    net_earned_premium: float | None = None
    new_policies: float | None = None
    total_policies: float | None = None

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class CompanyPanel:
    """Aligned N x J x M grid of raw metrics with an observed mask.

    ``observed[i, j]`` is True iff the source reported any value for that
    (company, quarter) cell; everywhere it is False the metric values are
    exactly zero.
    """

    companies: list[str]
    periods: list[Quarter]
    values: np.ndarray  # (N, J, len(METRICS)) float64
    observed: np.ndarray  # (N, J) bool

    @property
    def n_companies(self) -> int:
        return len(self.companies)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def metric(self, name: str) -> np.ndarray:
        """The (N, J) slice for one raw metric."""
        return self.values[:, :, METRICS.index(name)]

    def validate(self) -> None:
        n, j = self.n_companies, self.n_periods
        if self.values.shape != (n, j, len(METRICS)):
            raise PanelError(f"values shape {self.values.shape} != {(n, j, len(METRICS))}")
        if self.observed.shape != (n, j):
            raise PanelError(f"observed shape {self.observed.shape} != {(n, j)}")
        if len(set(self.companies)) != n:
            raise PanelError("duplicate company identifiers")
        indices = [p.index for p in self.periods]
        if indices != list(range(indices[0], indices[0] + j)):
            raise PanelError("periods must be strictly increasing and gap-free")
        if not np.all(np.isfinite(self.values)):
            raise PanelError("panel values must be finite")
        if np.any(self.values[~self.observed] != 0.0):
            raise PanelError("unobserved cells must be exactly zero")


def panel_from_records(records: list[RawRecord]) -> CompanyPanel:
    """Assemble records into a rectangular panel over the union quarter span.

    Company order is first appearance; periods ascend over the global
    min..max span. Cells without a record, and missing fields within a
    record, become zero with the observed mask reflecting row presence.
    """
    if not records:
        raise PanelError("no records to load")

    companies: list[str] = []
    seen: dict[tuple[str, Quarter], bool] = {}
    for rec in records:
        if not rec.company:
            raise PanelError("empty company identifier")
        key = (rec.company, rec.period)
        if key in seen:
            raise PanelError(f"duplicate record for ({rec.company}, {rec.period})")
        seen[key] = True
        if rec.company not in companies:
            companies.append(rec.company)

    first = min(r.period for r in records)
    last = max(r.period for r in records)
    periods = quarter_span(first, last)
    col = {c: i for i, c in enumerate(companies)}

    values = np.zeros((len(companies), len(periods), len(METRICS)))
    observed = np.zeros((len(companies), len(periods)), dtype=bool)
    for rec in records:
        i = col[rec.company]
        j = rec.period.index - first.index
        any_value = False
        for k, name in enumerate(METRICS):
            v = rec.metric(name)
            if v is None:
                continue
            if name in _NON_NEGATIVE and v < 0:
                raise PanelError(f"{name} must be >= 0, got {v} for ({rec.company}, {rec.period})")
            values[i, j, k] = float(v)
            any_value = True
        observed[i, j] = any_value

    panel = CompanyPanel(companies, periods, values, observed)
    panel.validate()
    return panel


def _parse_quarter(text: str) -> int:
    t = text.strip().upper().lstrip("Q")
    return int(t)


def _default_schema() -> dict[str, str]:
    schema = {"company": "company", "year": "year", "quarter": "quarter"}
    schema.update({name: name for name in METRICS})
    return schema


def load_panel(
    source: str | Path,
    schema: dict[str, str] | None = None,
    delimiter: str = ",",
) -> CompanyPanel:
    """Load a delimited source table into a validated panel.

    ``schema`` maps canonical field names (company, year, quarter, and the
    entries of :data:`METRICS`) to source column names. company/year/quarter
    are required; a metric column that is absent from the header is treated
    as unreported unless the schema names it explicitly, in which case the
    mismatch is an error. Empty cells mean "not reported".
    """
    path = Path(source)
    if not path.exists():
        raise PanelError(f"input file not found: {path}")

    explicit = set(schema) if schema else set()
    mapping = _default_schema()
    if schema:
        unknown = explicit - set(mapping)
        if unknown:
            raise PanelError(f"unknown schema fields: {sorted(unknown)}")
        mapping.update(schema)

    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = list(reader)
    if not rows or len(rows) < 2:
        raise PanelError(f"empty input file: {path}")

    header = [h.strip() for h in rows[0]]
    index: dict[str, int] = {}
    for field in ("company", "year", "quarter"):
        column = mapping[field]
        if column not in header:
            raise PanelError(f"required column {column!r} missing from header")
        index[field] = header.index(column)
    for name in METRICS:
        column = mapping[name]
        if column in header:
            index[name] = header.index(column)
        elif name in explicit:
            raise PanelError(f"schema column {column!r} for {name} missing from header")

    records: list[RawRecord] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        company = row[index["company"]].strip()
        try:
            year = int(row[index["year"]].strip())
            quarter = _parse_quarter(row[index["quarter"]])
        except ValueError as exc:
            raise PanelError(f"row {line_no}: unparseable period: {exc}") from exc
        fields: dict[str, float | None] = {}
        for name in METRICS:
            if name not in index:
                fields[name] = None
                continue
            cell = row[index[name]].strip() if index[name] < len(row) else ""
            if cell == "":
                fields[name] = None
            else:
                try:
                    fields[name] = float(cell)
                except ValueError as exc:
                    raise PanelError(f"row {line_no}: unparseable number {cell!r}") from exc
        records.append(RawRecord(company=company, period=Quarter(year, quarter), **fields))

    return panel_from_records(records)


@dataclass
class PanelSummary:
    """Observed-quarter counts per company plus the global span."""

    observed_per_company: dict[str, int]
    first: Quarter
    last: Quarter
    n_companies: int
    n_periods: int

    @property
    def total_observed(self) -> int:
        return sum(self.observed_per_company.values())


def panel_summary(panel: CompanyPanel) -> PanelSummary:
    panel.validate()
    counts = {c: int(panel.observed[i].sum()) for i, c in enumerate(panel.companies)}
    return PanelSummary(
        observed_per_company=counts,
        first=panel.periods[0],
        last=panel.periods[-1],
        n_companies=panel.n_companies,
        n_periods=panel.n_periods,
    )


def write_panel(panel: CompanyPanel, path: str | Path) -> None:
    """Write the canonical panel file: one row per (company, quarter) cell."""
    panel.validate()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company", "year", "quarter", "observed", *METRICS])
        for i, company in enumerate(panel.companies):
            for j, period in enumerate(panel.periods):
                writer.writerow(
                    [
                        company,
                        period.year,
                        period.quarter,
                        int(panel.observed[i, j]),
                        *(format(v, ".17g") for v in panel.values[i, j]),
                    ]
                )


def read_panel(path: str | Path) -> CompanyPanel:
    """Read a canonical panel file back into a validated panel."""
    path = Path(path)
    if not path.exists():
        raise PanelError(f"panel file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if len(rows) < 2:
        raise PanelError(f"empty panel file: {path}")
    expected = ["company", "year", "quarter", "observed", *METRICS]
    if rows[0] != expected:
        raise PanelError(f"unexpected panel header in {path}")

    companies: list[str] = []
    cells: dict[tuple[str, int], tuple[bool, list[float]]] = {}
    period_indices: set[int] = set()
    for row in rows[1:]:
        company = row[0]
        period = Quarter(int(row[1]), int(row[2]))
        if company not in companies:
            companies.append(company)
        key = (company, period.index)
        if key in cells:
            raise PanelError(f"duplicate cell for ({company}, {period})")
        cells[key] = (row[3] == "1", [float(v) for v in row[4:]])
        period_indices.add(period.index)

    first, last = min(period_indices), max(period_indices)
    periods = [Quarter.from_index(i) for i in range(first, last + 1)]
    values = np.zeros((len(companies), len(periods), len(METRICS)))
    observed = np.zeros((len(companies), len(periods)), dtype=bool)
    for (company, idx), (obs, metric_values) in cells.items():
        i = companies.index(company)
        j = idx - first
        observed[i, j] = obs
        values[i, j] = metric_values

    panel = CompanyPanel(companies, periods, values, observed)
    panel.validate()
    return panel
