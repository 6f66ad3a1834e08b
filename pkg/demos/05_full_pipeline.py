"""The staged pipeline end to end, via the same entry the CLI uses.

Every stage reads only the previous stage's files and leaves a manifest
with input hashes, so partial reruns and tamper checks are cheap.
Equivalent shell session:

    fincluster ingest    --workspace ws --seed 42 --input source.csv
    fincluster ratios    --workspace ws --seed 42
    fincluster fuse      --workspace ws --seed 42
    fincluster distances --workspace ws --seed 42
    fincluster cluster   --workspace ws --seed 42 --set cluster.m=4
    fincluster evaluate  --workspace ws --seed 42
    fincluster report    --workspace ws --seed 42
"""

import json
import tempfile
from pathlib import Path

from fincluster.cli import main
from fincluster.fixtures import write_synthetic_source

workdir = Path(tempfile.mkdtemp(prefix="fincluster-pipeline-"))
source = write_synthetic_source(workdir / "source.csv", n_companies=10, n_quarters=16, seed=3)
workspace = workdir / "ws"

common = [
    "--workspace", str(workspace),
    "--seed", "42",
    "--set", "fuse.hidden=12",
    "--set", "fuse.epochs=8",
    "--set", "cluster.m=4",
    "--set", "evaluate.m_max=8",
    "--set", "evaluate.method=hierarchical_complete",
]

stages = ["ingest", "ratios", "fuse", "distances", "cluster", "evaluate", "report"]
for stage in stages:
    args = [stage, *common] + (["--input", str(source)] if stage == "ingest" else [])
    code = main(args)
    print(f"--- {stage}: exit {code}")
    assert code == 0

print(f"\nworkspace {workspace} now holds:")
for path in sorted(workspace.iterdir()):
    print(f"  {path.name:32s} {path.stat().st_size:8d} bytes")

report = json.loads((workspace / "report.json").read_text())
print(f"\nchosen m: {report['selection']['chosen_m']} "
      f"(rule: {report['selection']['rule']})")
print(f"cluster sizes: {report['cluster_sizes']}")
print(f"silhouette at configured m: "
      f"{ {k: round(v, 3) for k, v in report['silhouette_at_configured_m'].items()} }")

manifest = json.loads((workspace / "cluster.manifest.json").read_text())
print(f"\ncluster stage manifest pins inputs: {list(manifest['inputs'])}")
