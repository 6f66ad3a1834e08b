import csv
import json
from pathlib import Path

import numpy as np
import pytest

from fincluster.cli import main
from fincluster.fixtures import write_synthetic_source
from fincluster.pipeline import (
    PipelineConfig,
    apply_overrides,
    load_config,
    stage_seed,
    verify_stage_inputs,
)

FAST = [
    "--set", "fuse.hidden=6",
    "--set", "fuse.epochs=3",
    "--set", "fuse.batch_size=4",
    "--set", "cluster.m=2",
    "--set", "evaluate.m_max=4",
    "--set", "evaluate.method=hierarchical_complete",
]

NUMERIC_ARTIFACTS = [
    "panel.csv",
    "panel_summary.csv",
    "ratio_table.csv",
    "ratio_scaled.csv",
    "scaling.json",
    "lstm_params.json",
    "latent.csv",
    "loss_history.csv",
    "distance_matrix.csv",
    "distance_matrix_raw.csv",
    "assignments.csv",
    "centers.csv",
    "dendrogram.csv",
    "leaf_order.csv",
    "kmeans_inertia.csv",
    "validation_curve.csv",
    "selection.json",
    "heatmap_tables.csv",
    "cluster_membership.csv",
    "report.json",
]


def run_pipeline(workspace: Path, source: Path, seed=42, extra=()):
    common = ["--workspace", str(workspace), "--seed", str(seed), *FAST, *extra]
    assert main(["ingest", *common, "--input", str(source)]) == 0
    for stage in ("ratios", "fuse", "distances", "cluster", "evaluate", "report"):
        assert main([stage, *common]) == 0


@pytest.fixture(scope="module")
def source(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "source.csv"
    write_synthetic_source(path, n_companies=6, n_quarters=8, seed=1)
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, source):
    ws = tmp_path_factory.mktemp("ws")
    run_pipeline(ws, source)
    return ws


class TestPipelineSmoke:
    def test_all_artifact_families_present(self, workspace):
        for name in NUMERIC_ARTIFACTS:
            assert (workspace / name).exists(), name
        for stage in ("ingest", "ratios", "fuse", "distances", "cluster", "evaluate", "report"):
            assert (workspace / f"{stage}.manifest.json").exists()

    def test_manifests_list_all_inputs(self, workspace):
        manifest = json.loads((workspace / "cluster.manifest.json").read_text())
        assert set(manifest["inputs"]) == {"distance_matrix.csv", "latent.csv"}
        assert all(len(h) == 64 for h in manifest["inputs"].values())
        assert verify_stage_inputs(workspace, "cluster") == []

    def test_tampered_input_detected(self, workspace, tmp_path):
        import shutil

        copy = tmp_path / "ws"
        shutil.copytree(workspace, copy)
        target = copy / "latent.csv"
        target.write_text(target.read_text().replace("0", "1", 1))
        assert "latent.csv" in verify_stage_inputs(copy, "cluster")


class TestStageDependencies:
    def test_cluster_before_fuse_names_missing_stage(self, tmp_path, source, capsys):
        ws = tmp_path / "ws"
        common = ["--workspace", str(ws), "--seed", "1", *FAST]
        assert main(["ingest", *common, "--input", str(source)]) == 0
        assert main(["ratios", *common]) == 0
        code = main(["cluster", *common])
        assert code != 0
        err = capsys.readouterr().err
        assert "fuse" in err or "distances" in err

    def test_config_error_before_any_write(self, tmp_path, source, capsys):
        ws = tmp_path / "ws"
        code = main(
            ["ingest", "--workspace", str(ws), "--input", str(source), "--set", "cluster.m=0"]
        )
        assert code == 2
        assert not ws.exists()

    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["ingest", "--workspace", str(tmp_path / "ws"), "--input", "nope.csv"])
        assert code == 2


class TestDeterminism:
    def test_byte_identical_numeric_artifacts(self, tmp_path, source):
        ws1 = tmp_path / "run1"
        ws2 = tmp_path / "run2"
        run_pipeline(ws1, source, seed=7)
        run_pipeline(ws2, source, seed=7)
        for name in NUMERIC_ARTIFACTS:
            assert (ws1 / name).read_bytes() == (ws2 / name).read_bytes(), name

    def test_stage_isolation_on_rerun(self, tmp_path, source):
        # deleting downstream artifacts never changes upstream rerun bytes
        ws = tmp_path / "ws"
        run_pipeline(ws, source, seed=9)
        upstream = (ws / "panel.csv").read_bytes()
        for name in ("latent.csv", "distance_matrix.csv", "assignments.csv"):
            (ws / name).unlink()
        common = ["--workspace", str(ws), "--seed", "9", *FAST]
        assert main(["ingest", *common, "--input", str(source)]) == 0
        assert (ws / "panel.csv").read_bytes() == upstream

    def test_stage_seeds_are_distinct_streams(self):
        seeds = {stage_seed(5, s) for s in ("ingest", "fuse", "cluster", "evaluate")}
        assert len(seeds) == 4
        assert stage_seed(5, "fuse") == stage_seed(5, "fuse")
        assert stage_seed(5, "fuse") != stage_seed(6, "fuse")


class TestHeatmapTables:
    def test_market_share_rows_sum_to_100(self, workspace):
        with (workspace / "heatmap_tables.csv").open() as fh:
            rows = [r for r in csv.DictReader(fh) if r["metric"] == "market_share"]
        by_period: dict[str, float] = {}
        for row in rows:
            by_period[row["period"]] = by_period.get(row["period"], 0.0) + float(row["value"])
        assert by_period and all(abs(total - 100.0) < 1e-9 for total in by_period.values())

    def test_latent_table_has_n_times_j_rows(self, workspace):
        with (workspace / "heatmap_tables.csv").open() as fh:
            rows = [r for r in csv.DictReader(fh) if r["metric"] == "latent"]
        with (workspace / "latent.csv").open() as fh:
            latent_rows = list(csv.DictReader(fh))
        assert len(rows) == len(latent_rows)

    def test_values_match_source_tables_elementwise(self, workspace):
        with (workspace / "heatmap_tables.csv").open() as fh:
            heat = {
                (r["entity"], r["period"], r["metric"]): float(r["value"])
                for r in csv.DictReader(fh)
            }
        with (workspace / "latent.csv").open() as fh:
            for row in csv.DictReader(fh):
                key = (row["company"], f"{row['year']}Q{row['quarter']}", "latent")
                assert heat[key] == float(row["z"])
        with (workspace / "panel.csv").open() as fh:
            rng = np.random.default_rng(0)
            panel_rows = list(csv.DictReader(fh))
            for row in [panel_rows[int(i)] for i in rng.integers(0, len(panel_rows), 10)]:
                key = (row["company"], f"{row['year']}Q{row['quarter']}", "new_policies")
                assert heat[key] == float(row["new_policies"])


class TestConfigFile:
    def test_ini_round_trip(self, tmp_path, source):
        ini = tmp_path / "run.ini"
        ini.write_text(
            "\n".join(
                [
                    "[pipeline]",
                    "workspace = %s" % (tmp_path / "ws"),
                    "seed = 13",
                    "[ingest]",
                    "input = %s" % source,
                    "[fuse]",
                    "hidden = 6",
                    "epochs = 2",
                    "[cluster]",
                    "m = 2",
                    "[evaluate]",
                    "m_max = 4",
                    "method = hierarchical_complete",
                ]
            )
        )
        assert main(["ingest", "--config", str(ini)]) == 0
        assert main(["ratios", "--config", str(ini)]) == 0
        assert (tmp_path / "ws" / "panel.csv").exists()

    def test_flags_override_file_values(self, tmp_path, source):
        ini = tmp_path / "run.ini"
        ini.write_text(f"[pipeline]\nseed = 13\n[ingest]\ninput = {source}\n")
        ws = tmp_path / "ws2"
        assert main(["ingest", "--config", str(ini), "--workspace", str(ws), "--seed", "99"]) == 0
        manifest = json.loads((ws / "ingest.manifest.json").read_text())
        assert manifest["seed"] == 99

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[pipeline]\nbogus = 1\n")
        with pytest.raises(Exception):
            load_config(ini)

    def test_overrides_parse_schema_columns(self):
        config = PipelineConfig()
        apply_overrides(config, ["ingest.col_company=Firm", "fuse.epochs=5"])
        assert config.schema == {"company": "Firm"}
        assert config.epochs == 5

    def test_selection_rule_fractions_configurable(self):
        config = PipelineConfig()
        apply_overrides(
            config,
            ["evaluate.selection_drop_frac=0.2", "evaluate.selection_silhouette_frac=0.8"],
        )
        assert config.selection_drop_frac == 0.2
        assert config.selection_silhouette_frac == 0.8

    def test_summary_carries_global_span(self, workspace):
        with (workspace / "panel_summary.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert all(r["span_start"] == rows[0]["span_start"] for r in rows)
        assert all(set(r) == {"company", "observed_quarters", "span_start", "span_end"} for r in rows)

    def test_json_format_for_auxiliary_tables(self, tmp_path, source):
        ws = tmp_path / "ws"
        common = ["--workspace", str(ws), "--seed", "3", "--format", "json", *FAST]
        assert main(["ingest", *common, "--input", str(source)]) == 0
        assert (ws / "panel_summary.json").exists()
        assert not (ws / "panel_summary.csv").exists()
