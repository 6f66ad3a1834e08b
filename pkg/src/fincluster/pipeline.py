"""Staged pipeline with file-based handoff, manifests, and seeded streams.

Each stage reads only prior-stage files from the workspace and writes its
own artifacts plus a manifest recording input hashes, the effective config,
and the stage's derived seed. Numeric exports use 17 significant digits so
a reload reproduces every float bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import (
    cut_dendrogram,
    hierarchical_complete,
    kmeans_dtw,
    leaf_ordering,
    write_dendrogram,
)
from .dtw import (
    pairwise_matrix,
    read_distance_matrix,
    write_distance_matrix,
)
from .lstm import LatentSeries, TrainConfig, encode_series, save_params, train
from .panel import CompanyPanel, Quarter, load_panel, panel_summary, read_panel, write_panel
from .ratios import (
    apply_scaling,
    compute_ratios,
    fit_scaling,
    read_ratio_table,
    write_ratio_table,
    write_scaling,
)
from .validation import (
    read_validation_curve,
    select_m,
    silhouette_mean,
    validation_sweep,
    write_selection,
    write_validation_curve,
)

STAGES = ("ingest", "ratios", "fuse", "distances", "cluster", "evaluate", "report")

#: Stage -> (artifact files it requires, stage that produces them).
_UPSTREAM: dict[str, list[tuple[str, str]]] = {
    "ingest": [],
    "ratios": [("panel.csv", "ingest")],
    "fuse": [("ratio_scaled.csv", "ratios")],
    "distances": [("latent.csv", "fuse")],
    "cluster": [("distance_matrix.csv", "distances"), ("latent.csv", "fuse")],
    "evaluate": [("distance_matrix.csv", "distances"), ("latent.csv", "fuse")],
    "report": [
        ("panel.csv", "ingest"),
        ("ratio_table.csv", "ratios"),
        ("latent.csv", "fuse"),
        ("distance_matrix.csv", "distances"),
        ("assignments.csv", "cluster"),
        ("validation_curve.csv", "evaluate"),
        ("selection.json", "evaluate"),
    ],
}


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


class StageDependencyError(RuntimeError):
    """A required upstream artifact is missing."""


@dataclass
class PipelineConfig:
    """Everything a run needs; file values can be overridden by CLI flags."""

    workspace: Path = Path("workspace")
    seed: int = 0
    fmt: str = "csv"

    # ingest
    input_path: Path | None = None
    delimiter: str = ","
    schema: dict[str, str] = field(default_factory=dict)

    # ratios
    scaling_mode: str = "within_company"

    # fuse
    hidden: int = 64
    epochs: int = 12
    batch_size: int = 16
    learning_rate: float = 1e-3

    # distances
    normalized: bool = True

    # cluster
    method: str = "both"  # kmeans | hierarchical | both
    m: int = 4
    max_iter: int = 50
    barycenter_iters: int = 10

    # evaluate
    m_min: int = 2
    m_max: int = 12
    sweep_method: str = "kmeans_dtw"
    selection_drop_frac: float = 0.1
    selection_silhouette_frac: float = 0.9
    reference_m: int | None = None
    reference_silhouette: float | None = None

    def validate(self) -> None:
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.fmt!r}")
        if self.scaling_mode not in ("within_company", "global"):
            raise ConfigError(f"unknown scaling mode {self.scaling_mode!r}")
        if self.method not in ("kmeans", "hierarchical", "both"):
            raise ConfigError(f"unknown cluster method {self.method!r}")
        if self.sweep_method not in ("kmeans_dtw", "hierarchical_complete"):
            raise ConfigError(f"unknown sweep method {self.sweep_method!r}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not 2 <= self.m_min <= self.m_max:
            raise ConfigError(f"need 2 <= m_min <= m_max, got {self.m_min}..{self.m_max}")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ConfigError("fuse settings must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be >= 0")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            hidden=self.hidden,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=stage_seed(self.seed, "fuse"),
        )


_INI_FIELDS = {
    ("pipeline", "workspace"): ("workspace", Path),
    ("pipeline", "seed"): ("seed", int),
    ("pipeline", "format"): ("fmt", str),
    ("ingest", "input"): ("input_path", Path),
    ("ingest", "delimiter"): ("delimiter", str),
    ("ratios", "scaling"): ("scaling_mode", str),
    ("fuse", "hidden"): ("hidden", int),
    ("fuse", "epochs"): ("epochs", int),
    ("fuse", "batch_size"): ("batch_size", int),
    ("fuse", "learning_rate"): ("learning_rate", float),
    ("distances", "normalized"): ("normalized", None),
    ("cluster", "method"): ("method", str),
    ("cluster", "m"): ("m", int),
    ("cluster", "max_iter"): ("max_iter", int),
    ("cluster", "barycenter_iters"): ("barycenter_iters", int),
    ("evaluate", "m_min"): ("m_min", int),
    ("evaluate", "m_max"): ("m_max", int),
    ("evaluate", "method"): ("sweep_method", str),
    ("evaluate", "selection_drop_frac"): ("selection_drop_frac", float),
    ("evaluate", "selection_silhouette_frac"): ("selection_silhouette_frac", float),
    ("evaluate", "reference_m"): ("reference_m", int),
    ("evaluate", "reference_silhouette"): ("reference_silhouette", float),
}


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected boolean, got {text!r}")


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Read the sectioned key=value config file; missing file -> defaults."""
    import configparser

    config = PipelineConfig()
    if path is None:
        return config
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == "ingest" and key.startswith("col_"):
                config.schema[key[len("col_"):]] = raw.strip()
                continue
            spec = _INI_FIELDS.get((section, key))
            if spec is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            name, cast = spec
            value = _parse_bool(raw) if cast is None else cast(raw.strip())
            setattr(config, name, value)
    return config


def apply_overrides(config: PipelineConfig, overrides: list[str]) -> None:
    """Apply ``section.key=value`` pairs on top of the file config."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        if section == "ingest" and key.startswith("col_"):
            config.schema[key[len("col_"):]] = raw.strip()
            continue
        spec = _INI_FIELDS.get((section, key))
        if spec is None:
            raise ConfigError(f"unknown config key [{section}] {key}")
        name, cast = spec
        value = _parse_bool(raw) if cast is None else cast(raw.strip())
        setattr(config, name, value)


def stage_seed(seed: int, stage: str) -> int:
    """Derive a per-stage stream from the single run seed."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(workspace: Path, stage: str) -> dict[str, Path]:
    inputs: dict[str, Path] = {}
    for name, producer in _UPSTREAM[stage]:
        path = workspace / name
        if not path.exists():
            raise StageDependencyError(
                f"stage {stage!r} needs {name}; run the {producer!r} stage first"
            )
        inputs[name] = path
    return inputs


def write_manifest(
    workspace: Path,
    stage: str,
    config: PipelineConfig,
    inputs: dict[str, Path],
    outputs: list[Path],
) -> Path:
    manifest = {
        "stage": stage,
        "tool_version": __version__,
        "seed": config.seed,
        "stage_seed": stage_seed(config.seed, stage),
        "config": {
            f.name: str(getattr(config, f.name)) for f in dc_fields(config)
        },
        "inputs": {name: _sha256(path) for name, path in sorted(inputs.items())},
        "outputs": [p.name for p in outputs],
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = workspace / f"{stage}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def verify_stage_inputs(workspace: Path, stage: str) -> list[str]:
    """Names of manifest inputs whose current hash no longer matches."""
    manifest = json.loads((workspace / f"{stage}.manifest.json").read_text())
    stale = []
    for name, digest in manifest["inputs"].items():
        path = workspace / name
        if not path.exists():
            path = Path(name)
        if not path.exists() or _sha256(path) != digest:
            stale.append(name)
    return stale


def _write_table(path: Path, header: list[str], rows: list[list], fmt: str) -> Path:
    """Write a table as csv, or mirror it to json when configured."""
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        out = path.with_suffix(".json")
        out.write_text(json.dumps(payload, indent=2))
        return out
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


# --- stages -----------------------------------------------------------------

def run_ingest(config: PipelineConfig) -> list[Path]:
    if config.input_path is None:
        raise ConfigError("ingest requires [ingest] input=<source table>")
    source = Path(config.input_path)
    if not source.exists():
        raise ConfigError(f"input file not found: {source}")
    workspace = Path(config.workspace)
    workspace.mkdir(parents=True, exist_ok=True)

    panel = load_panel(source, schema=config.schema or None, delimiter=config.delimiter)
    panel_path = workspace / "panel.csv"
    write_panel(panel, panel_path)

    summary = panel_summary(panel)
    rows = [
        [c, n, str(summary.first), str(summary.last)]
        for c, n in summary.observed_per_company.items()
    ]
    summary_path = _write_table(
        workspace / "panel_summary.csv",
        ["company", "observed_quarters", "span_start", "span_end"],
        rows,
        config.fmt,
    )
    outputs = [panel_path, summary_path]
    write_manifest(workspace, "ingest", config, {"source": source}, outputs)
    return outputs


def run_ratios(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "ratios")
    panel = read_panel(inputs["panel.csv"])

    tensor = compute_ratios(panel)
    spec = fit_scaling(tensor, mode=config.scaling_mode)
    scaled = apply_scaling(tensor, spec)

    table_path = workspace / "ratio_table.csv"
    write_ratio_table(tensor, table_path)
    scaled_path = workspace / "ratio_scaled.csv"
    write_ratio_table(scaled, scaled_path)
    spec_path = workspace / "scaling.json"
    write_scaling(spec, spec_path)

    outputs = [table_path, scaled_path, spec_path]
    write_manifest(workspace, "ratios", config, inputs, outputs)
    return outputs


def write_latent_table(latent: LatentSeries, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company", "year", "quarter", "z"])
        for i, company in enumerate(latent.companies):
            for j, period in enumerate(latent.periods):
                writer.writerow(
                    [company, period.year, period.quarter, format(latent.z[i, j, 0], ".17g")]
                )


def read_latent_table(path: Path) -> LatentSeries:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["company", "year", "quarter", "z"]:
        raise ConfigError(f"unexpected latent table header in {path}")
    companies: list[str] = []
    indices: set[int] = set()
    cells: dict[tuple[str, int], float] = {}
    for company, year, quarter, value in rows[1:]:
        if company not in companies:
            companies.append(company)
        idx = Quarter(int(year), int(quarter)).index
        indices.add(idx)
        cells[(company, idx)] = float(value)
    first = min(indices)
    periods = [Quarter.from_index(i) for i in range(first, max(indices) + 1)]
    z = np.zeros((len(companies), len(periods), 1))
    for (company, idx), value in cells.items():
        z[companies.index(company), idx - first, 0] = value
    return LatentSeries(companies=companies, periods=periods, z=z)


def run_fuse(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "fuse")
    scaled = read_ratio_table(inputs["ratio_scaled.csv"])

    params, history = train(scaled, config.train_config())
    latent = encode_series(params, scaled)

    params_path = workspace / "lstm_params.json"
    save_params(params, params_path, config=config.train_config())
    latent_path = workspace / "latent.csv"
    write_latent_table(latent, latent_path)
    history_path = _write_table(
        workspace / "loss_history.csv",
        ["epoch", "loss"],
        [[e, format(loss, ".17g")] for e, loss in enumerate(history)],
        config.fmt,
    )
    outputs = [params_path, latent_path, history_path]
    write_manifest(workspace, "fuse", config, inputs, outputs)
    return outputs


def run_distances(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "distances")
    latent = read_latent_table(inputs["latent.csv"])

    # Primary matrix honors the configured normalization; the raw cumulative
    # optimum is always exported alongside for comparison.
    matrix = pairwise_matrix(latent, normalized=config.normalized)
    matrix_path = workspace / "distance_matrix.csv"
    write_distance_matrix(matrix, matrix_path)
    raw = matrix if not config.normalized else pairwise_matrix(latent, normalized=False)
    raw_path = workspace / "distance_matrix_raw.csv"
    write_distance_matrix(raw, raw_path)

    outputs = [matrix_path, raw_path]
    write_manifest(workspace, "distances", config, inputs, outputs)
    return outputs


def run_cluster(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "cluster")
    matrix = read_distance_matrix(inputs["distance_matrix.csv"])
    latent = read_latent_table(inputs["latent.csv"])
    companies, periods = latent.companies, latent.periods
    if companies != matrix.labels:
        raise ConfigError("latent table and distance matrix disagree on companies")

    assignment_rows: list[list] = []
    center_rows: list[list] = []
    outputs: list[Path] = []

    if config.method in ("kmeans", "both"):
        assignment, centers = kmeans_dtw(
            latent,
            config.m,
            seed=stage_seed(config.seed, "cluster"),
            max_iter=config.max_iter,
            barycenter_iters=config.barycenter_iters,
            distances=matrix,
            normalized=config.normalized,
        )
        for company, label in zip(companies, assignment.labels):
            assignment_rows.append([company, "kmeans_dtw", config.m, int(label)])
        for k in range(config.m):
            for j, period in enumerate(periods):
                center_rows.append(
                    [k, period.year, period.quarter, format(centers[k, j], ".17g")]
                )
        inertia_path = _write_table(
            workspace / "kmeans_inertia.csv",
            ["iteration", "inertia"],
            [[i, format(v, ".17g")] for i, v in enumerate(assignment.inertia_history)],
            config.fmt,
        )
        outputs.append(inertia_path)

    dend = hierarchical_complete(matrix)
    if config.method in ("hierarchical", "both"):
        h_assignment = cut_dendrogram(dend, config.m)
        for company, label in zip(companies, h_assignment.labels):
            assignment_rows.append([company, "hierarchical_complete", config.m, int(label)])

    dend_path = workspace / "dendrogram.csv"
    write_dendrogram(dend, dend_path)
    order = leaf_ordering(dend)
    order_path = _write_table(
        workspace / "leaf_order.csv",
        ["position", "company"],
        [[pos, companies[i]] for pos, i in enumerate(order)],
        "csv",
    )
    assignments_path = _write_table(
        workspace / "assignments.csv",
        ["company", "method", "m", "label"],
        assignment_rows,
        "csv",
    )
    outputs = [assignments_path, dend_path, order_path] + outputs
    if center_rows:
        centers_path = _write_table(
            workspace / "centers.csv", ["cluster", "year", "quarter", "value"], center_rows, "csv"
        )
        outputs.append(centers_path)

    write_manifest(workspace, "cluster", config, inputs, outputs)
    return outputs


def run_evaluate(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "evaluate")
    matrix = read_distance_matrix(inputs["distance_matrix.csv"])
    latent = read_latent_table(inputs["latent.csv"])

    m_max = min(config.m_max, matrix.n)
    curve = validation_sweep(
        latent,
        matrix,
        range(config.m_min, m_max + 1),
        method=config.sweep_method,
        seed=stage_seed(config.seed, "evaluate"),
        max_iter=config.max_iter,
        barycenter_iters=config.barycenter_iters,
    )
    curve_path = workspace / "validation_curve.csv"
    write_validation_curve(curve, curve_path)

    report = select_m(
        curve,
        distortion_drop_frac=config.selection_drop_frac,
        silhouette_frac=config.selection_silhouette_frac,
    )
    extra: dict = {"method": curve.method, "m_range": [config.m_min, m_max]}
    if config.reference_m is not None and config.reference_m in curve.ms:
        at = curve.ms.index(config.reference_m)
        extra["reference"] = {
            "m": config.reference_m,
            "achieved_silhouette": curve.silhouettes[at],
            "reference_silhouette": config.reference_silhouette,
        }
    selection_path = workspace / "selection.json"
    write_selection(report, selection_path, extra=extra)

    outputs = [curve_path, selection_path]
    write_manifest(workspace, "evaluate", config, inputs, outputs)
    return outputs


#: Heatmap metrics exported for plotting: (table metric name, source).
_HEATMAP_METRICS = (
    ("market_share", "ratio"),
    ("net_earned_premium", "panel"),
    ("underwriting_profit", "panel"),
    ("new_policies", "panel"),
    ("total_policies", "panel"),
    ("latent", "latent"),
)


def export_heatmap_tables(
    panel: CompanyPanel,
    market_share: np.ndarray,
    z: np.ndarray,
    path: Path,
) -> Path:
    """Long-format (entity, period, metric, value) table behind the heatmaps."""
    rows: list[list] = []
    for name, source in _HEATMAP_METRICS:
        if source == "ratio":
            grid = market_share
        elif source == "panel":
            grid = panel.metric(name)
        else:
            grid = z[:, :, 0]
        for i, company in enumerate(panel.companies):
            for j, period in enumerate(panel.periods):
                rows.append(
                    [company, str(period), name, format(grid[i, j], ".17g")]
                )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "period", "metric", "value"])
        writer.writerows(rows)
    return path


def run_report(config: PipelineConfig) -> list[Path]:
    workspace = Path(config.workspace)
    inputs = _require(workspace, "report")
    panel = read_panel(inputs["panel.csv"])
    tensor = read_ratio_table(inputs["ratio_table.csv"])
    latent = read_latent_table(inputs["latent.csv"])
    companies = latent.companies
    matrix = read_distance_matrix(inputs["distance_matrix.csv"])

    heatmap_path = export_heatmap_tables(
        panel, tensor.feature("market_share"), latent.z, workspace / "heatmap_tables.csv"
    )

    with inputs["assignments.csv"].open(newline="") as fh:
        assignment_rows = list(csv.reader(fh))[1:]
    membership: dict[str, dict[int, list[str]]] = {}
    for company, method, _m, label in assignment_rows:
        membership.setdefault(method, {}).setdefault(int(label), []).append(company)
    membership_rows = [
        [method, label, company]
        for method in sorted(membership)
        for label in sorted(membership[method])
        for company in membership[method][label]
    ]
    membership_path = _write_table(
        workspace / "cluster_membership.csv",
        ["method", "cluster", "company"],
        membership_rows,
        "csv",
    )

    silhouettes = {}
    for method, clusters in membership.items():
        labels = np.empty(len(companies), dtype=int)
        for label, members in clusters.items():
            for company in members:
                labels[companies.index(company)] = label
        if len(clusters) >= 2:
            silhouettes[method] = silhouette_mean(matrix, labels)

    selection = json.loads(inputs["selection.json"].read_text())
    curve = read_validation_curve(inputs["validation_curve.csv"])
    report = {
        "n_companies": panel.n_companies,
        "n_periods": panel.n_periods,
        "configured_m": config.m,
        "selection": selection,
        "validation_curve": [
            {"m": m, "silhouette": s, "distortion": v}
            for m, s, v in zip(curve.ms, curve.silhouettes, curve.distortions)
        ],
        "silhouette_at_configured_m": silhouettes,
        "cluster_sizes": {
            method: {str(label): len(members) for label, members in sorted(clusters.items())}
            for method, clusters in membership.items()
        },
        "artifacts": sorted(p.name for p in workspace.iterdir() if p.is_file()),
    }
    report_path = workspace / "report.json"
    report_path.write_text(json.dumps(report, indent=2))

    outputs = [heatmap_path, membership_path, report_path]
    write_manifest(workspace, "report", config, inputs, outputs)
    return outputs


_RUNNERS = {
    "ingest": run_ingest,
    "ratios": run_ratios,
    "fuse": run_fuse,
    "distances": run_distances,
    "cluster": run_cluster,
    "evaluate": run_evaluate,
    "report": run_report,
}


def run_stage(stage: str, config: PipelineConfig) -> list[Path]:
    if stage not in _RUNNERS:
        raise ConfigError(f"unknown stage {stage!r}")
    config.validate()
    return _RUNNERS[stage](config)
