"""Choosing the cluster count with the silhouette and elbow curves.

Sweeps candidate m over a planted four-cluster fixture and prints both
curves as text, then applies the default selection rule.
"""

import numpy as np

from fincluster import pairwise_matrix, select_m, validation_sweep
from fincluster.fixtures import planted_latent_clusters

z, _ = planted_latent_clusters(seed=11)
matrix = pairwise_matrix(z)

curve = validation_sweep(z, matrix, range(2, 9), method="kmeans_dtw", seed=2)

print("m   silhouette                 distortion")
max_sil = max(curve.silhouettes)
max_dist = max(curve.distortions)
for m, sil, dist in zip(curve.ms, curve.silhouettes, curve.distortions):
    sil_bar = "#" * int(24 * sil / max_sil)
    dist_bar = "#" * int(24 * dist / max_dist)
    print(f"{m}   {sil:6.3f} {sil_bar:24s}  {dist:8.2f} {dist_bar}")

report = select_m(curve)
print(f"\nchosen m = {report.chosen_m} via {report.rule}")
print(f"silhouette at chosen m: {report.silhouette:.3f}")
print(f"distortion at chosen m: {report.distortion:.2f}")
print(f"evidence: {report.evidence}")

# The same sweep through the hierarchy gives a second opinion.
hier = validation_sweep(z, matrix, range(2, 9), method="hierarchical_complete")
best_h = hier.ms[int(np.argmax(hier.silhouettes))]
print(f"\nhierarchical sweep peaks at m = {best_h}")
