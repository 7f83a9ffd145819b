"""Identify mechanically self-similar sub-domains from full-field displacement data.

The package generates heterogeneous hyperelastic test specimens with known
ground truth, turns scattered displacement markers into gridded kinematic
features, clusters them per load case or by consensus across load cases,
and places strain sensors at cluster medoids.
"""

__version__ = "0.1.0"

from .clustering import Labeling, adjusted_rand_index, iforest, kmeans, ocsvm, spectral  # noqa: E402
from .config import RunConfig, load_config  # noqa: E402
from .ensemble import (  # noqa: E402
    SimilarityOperator,
    build_hypergraph,
    connected_components,
    cspa,
    enforce_min_size,
    ensemble_pipeline,
)
from .forward_sim import (  # noqa: E402
    PatternSpec,
    build_domain,
    make_boundary_condition,
    sample_markers,
    solve_forward,
)
from .kinematics import (  # noqa: E402
    FeatureMatrix,
    GridField,
    MarkerSet,
    assemble_features,
    compute_kinematics,
    interpolate_to_grid,
)
from .pipeline import run_experiment  # noqa: E402
from .reconstruction import cluster_medoids, reconstruct_field, reconstruction_mse, sensor_sweep  # noqa: E402

__all__ = [
    "FeatureMatrix",
    "GridField",
    "Labeling",
    "MarkerSet",
    "PatternSpec",
    "RunConfig",
    "SimilarityOperator",
    "adjusted_rand_index",
    "assemble_features",
    "build_domain",
    "build_hypergraph",
    "cluster_medoids",
    "compute_kinematics",
    "connected_components",
    "cspa",
    "enforce_min_size",
    "ensemble_pipeline",
    "iforest",
    "interpolate_to_grid",
    "kmeans",
    "load_config",
    "make_boundary_condition",
    "ocsvm",
    "reconstruct_field",
    "reconstruction_mse",
    "run_experiment",
    "sample_markers",
    "sensor_sweep",
    "solve_forward",
    "spectral",
]
