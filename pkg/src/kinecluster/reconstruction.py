"""Piecewise-constant strain reconstruction from one sensor per cluster.

A sensor sits at each cluster's medoid (in strain-feature space); every node
of the cluster then takes the medoid's strain value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .clustering import Labeling, kmeans
from .clustering.kmeans import _values
from .ensemble import connected_components, ensemble_pipeline
from .errors import ClusteringError, ValidationError
from .kinematics import FEATURE_KINDS

CHUNK = 512


def _medoid(X):
    """Row of ``X`` with the smallest total distance to all rows; first on ties."""
    if len(X) == 1:
        return 0
    totals = np.empty(len(X))
    for s in range(0, len(X), CHUNK):
        totals[s : s + CHUNK] = cdist(X[s : s + CHUNK], X).sum(axis=1)
    return int(np.argmin(totals))


def cluster_medoids(features, labeling: Labeling):
    """Global row index of each cluster's medoid, indexed by cluster id."""
    X = _values(features)
    labels = np.asarray(getattr(labeling, "labels", labeling))
    if len(labels) != len(X):
        raise ValidationError("labeling and features differ in length")
    if labels.min() < 0:
        raise ValidationError("every row must be labeled")
    k = int(labels.max()) + 1
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(k + 1))
    medoids = np.empty(k, dtype=np.int64)
    for c in range(k):
        members = order[bounds[c] : bounds[c + 1]]
        if len(members) == 0:
            raise ClusteringError(f"cluster {c} is empty", stage="medoids")
        medoids[c] = members[_medoid(X[members])]
    return medoids


def reconstruct_field(values, labeling, medoids):
    """Replace each node's value by its cluster medoid's value."""
    values = np.asarray(values, dtype=float)
    labels = np.asarray(getattr(labeling, "labels", labeling))
    medoids = np.asarray(medoids, dtype=np.int64)
    if len(labels) != len(values):
        raise ValidationError("labeling and field differ in length")
    if labels.max() >= len(medoids) or np.any(labels[medoids] != np.arange(len(medoids))):
        raise ValidationError("medoids are inconsistent with the labeling")
    return values[medoids[labels]]


def reconstruction_mse(original, reconstructed):
    a = np.asarray(original, dtype=float)
    b = np.asarray(reconstructed, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass
class ReconstructionReport:
    k: int
    n_sensors: int
    medoids: np.ndarray
    positions: np.ndarray | None
    components: tuple
    reconstructed: np.ndarray = field(repr=False)
    mse: float
    mse_components: dict
    eval_case: int
    mode: str

    def to_dict(self):
        return {
            "k": self.k,
            "n_sensors": self.n_sensors,
            "mse": self.mse,
            "mse_components": self.mse_components,
            "eval_case": self.eval_case,
            "mode": self.mode,
            "medoids": self.medoids.tolist(),
            "positions": None if self.positions is None else self.positions.tolist(),
        }


def _sweep_labeling(feature_sets, k, seed, min_size):
    n = len(_values(feature_sets[0]))
    shape = getattr(feature_sets[0], "grid_shape", None)
    if k >= n:
        return Labeling(np.arange(n), grid_shape=shape, method="identity")
    if len(feature_sets) == 1:
        lab = kmeans(feature_sets[0], k, seed=seed)
        return connected_components(lab) if shape is not None else lab
    return ensemble_pipeline(feature_sets, k_base=k, k_final=k, min_size=min_size, seed=seed)


def sensor_sweep(feature_sets, k_range, eval_case=0, seed=0, components=("E22",), min_size=5, positions=None):
    """MSE of medoid reconstructions over a range of target cluster counts.

    ``feature_sets`` holds Green-Lagrange features; one set gives the
    single-load variant (k-means plus connected components), several give
    the ensemble variant. Errors are measured on ``feature_sets[eval_case]``.
    The realized sensor count can exceed ``k`` after spatial splitting.
    """
    k_range = [int(k) for k in k_range]
    if any(b <= a for a, b in zip(k_range, k_range[1:])) or not k_range or k_range[0] < 1:
        raise ValidationError("k_range must be ascending positive integers")
    if not 0 <= eval_case < len(feature_sets):
        raise ValidationError("eval_case out of range")
    target = feature_sets[eval_case]
    if getattr(target, "kind", "green_lagrange") != "green_lagrange":
        raise ValidationError("reconstruction needs Green-Lagrange features")
    columns = FEATURE_KINDS["green_lagrange"]
    unknown = set(components) - set(columns)
    if unknown:
        raise ValidationError(f"unknown strain components {sorted(unknown)}")
    strain = _values(target)
    if getattr(target, "standardized", False):
        strain = strain * target.scale + target.mean
    picked = [columns.index(c) for c in components]
    mode = "single" if len(feature_sets) == 1 else "ensemble"

    reports = []
    for k in k_range:
        if k == 1:
            labeling = Labeling(np.zeros(len(strain), dtype=np.int64), method="constant")
        else:
            labeling = _sweep_labeling(feature_sets, k, seed, min_size)
        medoids = cluster_medoids(strain, labeling)
        recon = reconstruct_field(strain[:, picked], labeling, medoids)
        per = {c: reconstruction_mse(strain[:, p], recon[:, i]) for i, (c, p) in enumerate(zip(components, picked))}
        reports.append(
            ReconstructionReport(
                k=k,
                n_sensors=len(medoids),
                medoids=medoids,
                positions=None if positions is None else np.asarray(positions)[medoids],
                components=tuple(components),
                reconstructed=recon,
                mse=float(np.mean(list(per.values()))),
                mse_components=per,
                eval_case=eval_case,
                mode=mode,
            )
        )
    return reports
