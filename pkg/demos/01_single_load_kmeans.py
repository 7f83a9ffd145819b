"""Find a stiff circular inclusion from one equibiaxial stretch.

Run with ``python demos/01_single_load_kmeans.py``; images land in ``demo_out/``.
"""

# %% simulate
from pathlib import Path

from kinecluster import PatternSpec, adjusted_rand_index, build_domain, kmeans, make_boundary_condition
from kinecluster.config import BENCHMARK_MESH
from kinecluster.forward_sim import grid_points, sample_markers, solve_forward
from kinecluster.imaging import emit_heatmap, emit_label_image
from kinecluster.kinematics import markers_to_features

out = Path("demo_out")
out.mkdir(exist_ok=True)
pattern = PatternSpec.circle()
domain = build_domain(pattern, BENCHMARK_MESH)
field = solve_forward(domain, make_boundary_condition("equibiaxial", 0.3))
print("Newton iterations:", field.diagnostics["newton_iterations"])

# %% markers to kinematics
markers = sample_markers(field, 1000, seed=7)
features, grid = markers_to_features(markers, "invariants", R=89)
emit_heatmap(grid.I1, out / "01_I1.pgm")

# %% cluster and score
labels = kmeans(features, 2, seed=3)
truth = pattern.labels(grid_points(89))
print(f"ARI against the true inclusion: {adjusted_rand_index(truth, labels):.3f}")
emit_label_image(labels, out / "01_labels.ppm")
