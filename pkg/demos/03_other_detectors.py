"""Spectral clustering, isolation forest and a one-class SVM on the same data."""

# %%
from kinecluster import PatternSpec, adjusted_rand_index, build_domain, make_boundary_condition
from kinecluster.clustering import iforest, kmeans, ocsvm, spectral
from kinecluster.forward_sim import grid_points, sample_markers, solve_forward
from kinecluster.kinematics import markers_to_features

pattern = PatternSpec.circle()
field = solve_forward(build_domain(pattern, 48), make_boundary_condition("equibiaxial", 0.3))
features, _ = markers_to_features(sample_markers(field, 1000, seed=7), "invariants", R=45)
truth = pattern.labels(grid_points(45))

# %% the inclusion occupies about 13% of the square, so tell the detectors so
runs = {
    "k-means": kmeans(features, 2, seed=0),
    "spectral": spectral(features, 2, gamma=1.0, seed=0),
    "isolation forest": iforest(features, seed=0, contamination=0.13),
    "one-class SVM": ocsvm(features, nu=0.13),
}
for name, labels in runs.items():
    print(f"{name:>16}: ARI {adjusted_rand_index(truth, labels):+.3f}")
