"""Consensus clustering across load cases.

Each load case is clustered on its own, split into spatially connected
segments and cleaned of tiny segments. The cleaned labelings are combined
through their co-association similarity ``S = (1/r) H H^T``, where ``H`` is
the binary object-by-cluster hypergraph incidence matrix, and ``S`` is
partitioned spectrally without ever being formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator
from scipy.spatial import cKDTree

from .clustering import UNLABELED, Labeling, kmeans, spectral, spectral_embedding
from .clustering.kmeans import _values
from .errors import ClusteringError, KineclusterError, ValidationError

CONNECTIVITY = {4: ndimage.generate_binary_structure(2, 1), 8: ndimage.generate_binary_structure(2, 2)}
AUTO_MAX_CLUSTERS = 32


def _grid_labels(labeling):
    if not isinstance(labeling, Labeling) or labeling.grid_shape is None:
        raise ValidationError("a Labeling with a grid shape is required")
    return labeling.image()


def _first_encounter(labels):
    """Renumber non-negative ids densely in order of first appearance."""
    out = np.full_like(labels, UNLABELED)
    valid = labels >= 0
    uniq, first, inverse = np.unique(labels[valid], return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    out[valid] = rank[inverse]
    return out


def connected_components(labeling: Labeling, connectivity=4):
    """Split every cluster into its spatially connected pieces.

    Output ids are dense and numbered in row-major scan order of each
    component's first node. Unlabeled nodes stay unlabeled.
    """
    if connectivity not in CONNECTIVITY:
        raise ValidationError("connectivity must be 4 or 8")
    image = _grid_labels(labeling)
    out = np.zeros(image.shape, dtype=np.int64)
    offset = 0
    for value in np.unique(image[image >= 0]):
        comp, count = ndimage.label(image == value, structure=CONNECTIVITY[connectivity])
        mask = comp > 0
        out[mask] = comp[mask] + offset
        offset += count
    out = out.ravel() - 1
    return Labeling(
        _first_encounter(out),
        k=None,
        grid_shape=labeling.grid_shape,
        method="connected_components",
        params={"connectivity": connectivity, "source": labeling.method},
    )


def enforce_min_size(segmented: Labeling, min_size=5):
    """Absorb segments smaller than ``min_size`` into the nearest surviving one.

    Distances are Euclidean in grid-index coordinates; equidistant
    candidates resolve to the smaller surviving label id.
    """
    if min_size < 1:
        raise ValidationError("min_size must be >= 1")
    image = _grid_labels(segmented)
    labels = image.ravel().copy()
    sizes = np.bincount(labels[labels >= 0], minlength=segmented.k or 0)
    keep = sizes >= min_size
    if not keep.any():
        raise ClusteringError(f"no segment reaches min_size={min_size}", stage="enforce_min_size")
    small = np.flatnonzero((labels >= 0) & ~keep[np.maximum(labels, 0)])
    n_absorbed = len(small)
    if n_absorbed:
        rows, cols = np.divmod(np.arange(labels.size), image.shape[1])
        coords = np.column_stack([rows, cols]).astype(float)
        host = np.flatnonzero((labels >= 0) & keep[np.maximum(labels, 0)])
        tree = cKDTree(coords[host])
        dist, _ = tree.query(coords[small])
        for node, d in zip(small, dist):
            cands = tree.query_ball_point(coords[node], d * (1 + 1e-12) + 1e-12)
            labels[node] = labels[host[cands]].min()
    out = _first_encounter(labels)
    return Labeling(
        out,
        k=None,
        grid_shape=segmented.grid_shape,
        method="min_size",
        params={"min_size": min_size, "absorbed_nodes": int(n_absorbed), "removed_segments": int((~keep).sum())},
    )


def segment(labeling: Labeling, min_size=5, connectivity=4):
    """Connected components followed by minimum-size cleanup."""
    return enforce_min_size(connected_components(labeling, connectivity), min_size)


@dataclass
class Hypergraph:
    """Sparse binary incidence ``H`` (objects x clusters) of ``r`` labelings."""

    H: sp.csr_matrix
    blocks: tuple
    r: int

    @property
    def n(self):
        return self.H.shape[0]


def build_hypergraph(labelings):
    """One indicator column per (labeling, cluster), ordered by labeling then id.

    Cluster ids within a labeling are taken in sorted order; unlabeled
    objects get an all-zero row block.
    """
    arrays = [np.asarray(getattr(lab, "labels", lab)).ravel() for lab in labelings]
    if len(arrays) < 2:
        raise ValidationError("at least two labelings are required")
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValidationError("labelings differ in length")
    rows, cols, blocks = [], [], []
    start = 0
    for a in arrays:
        ids = np.unique(a[a != UNLABELED])
        labeled = np.flatnonzero(a != UNLABELED)
        rows.append(labeled)
        cols.append(start + np.searchsorted(ids, a[labeled]))
        blocks.append((start, start + len(ids)))
        start += len(ids)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    H = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, start))
    return Hypergraph(H, tuple(blocks), len(arrays))


class SimilarityOperator:
    """Implicit ``S = (1/r) H H^T``; products cost ``O(nnz(H))``."""

    def __init__(self, hypergraph: Hypergraph):
        self.hypergraph = hypergraph
        self.H = hypergraph.H
        self.Ht = hypergraph.H.T.tocsr()
        self.r = hypergraph.r
        self.shape = (hypergraph.n, hypergraph.n)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        return (self.H @ (self.Ht @ v)) / self.r

    def __matmul__(self, v):
        return self.matvec(v)

    def degrees(self):
        """Row sums ``S 1`` without forming ``S``."""
        return self.matvec(np.ones(self.shape[0]))

    def normalized_factor(self, degrees):
        """Dense ``M`` with ``D^-1/2 S D^-1/2 = M M^T`` (``n x m``)."""
        scale = 1.0 / np.sqrt(np.asarray(degrees, dtype=float) * self.r)
        return (self.H.multiply(scale[:, None])).toarray()

    def as_linear_operator(self):
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.matvec, dtype=float)

    def toarray(self):
        """Materialized ``S``; only for small problems and tests."""
        return (self.H @ self.Ht).toarray() / self.r


def eigengap_k(eigenvalues, k_min=2):
    """Cluster count at the widest gap of a descending eigenvalue sequence."""
    vals = np.asarray(eigenvalues, dtype=float)
    if len(vals) <= k_min:
        return len(vals)
    gaps = vals[k_min - 1 : -1] - vals[k_min:]
    return int(k_min + np.argmax(gaps))


def cspa(labelings, k_final=2, seed=0):
    """Consensus of ``labelings`` by spectral partitioning of their co-association.

    ``k_final="auto"`` picks the count at the widest gap in the leading
    eigenvalues of the consensus random-walk matrix.
    """
    hyper = build_hypergraph(labelings)
    S = SimilarityOperator(hyper)
    n = hyper.n
    grid_shape = next((lab.grid_shape for lab in labelings if getattr(lab, "grid_shape", None)), None)
    top = min(n, max(AUTO_MAX_CLUSTERS, 2))
    spectrum, _ = spectral_embedding(S, top, seed=seed)
    if k_final == "auto":
        k = eigengap_k(spectrum)
    else:
        k = int(k_final)
        if k < 2:
            raise ValidationError("k_final must be >= 2")
    out = spectral(affinity=S, k=k, seed=seed)
    return Labeling(
        out.labels,
        k=k,
        grid_shape=grid_shape,
        method="cspa",
        params={"k_final": k, "requested_k": k_final, "r": hyper.r, "clusters": hyper.H.shape[1], "eigenvalues": spectrum},
        flags=list(out.flags),
    )


def ensemble_pipeline(feature_sets, k_base=2, k_final=None, min_size=5, seed=0, connectivity=4):
    """Full consensus pipeline over feature sets that share one grid.

    Returns the final segmented Labeling; ``params["stages"]`` keeps the
    per-set base and segmented labelings plus the raw consensus.
    """
    if len(feature_sets) < 2:
        raise ValidationError("the ensemble needs at least two feature sets")
    shapes = {getattr(fs, "grid_shape", None) for fs in feature_sets}
    rows = {len(_values(fs)) for fs in feature_sets}
    if len(shapes) != 1 or None in shapes or len(rows) != 1:
        raise ValidationError("all feature sets must come from the same grid")
    k_final = k_base if k_final is None else k_final

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except KineclusterError as exc:
            inner = getattr(exc, "stage", None)
            message = str(exc).removeprefix(f"[{inner}] ") if inner else str(exc)
            path = f"{name}/{inner}" if inner else name
            raise ClusteringError(message, stage=path, diagnostics=getattr(exc, "diagnostics", None)) from exc

    base, segmented = [], []
    for i, fs in enumerate(feature_sets):
        lab = stage(f"kmeans[{i}]", kmeans, fs, k_base, seed=seed)
        base.append(lab)
        segmented.append(stage(f"segment[{i}]", segment, lab, min_size, connectivity))
    consensus = stage("cspa", cspa, segmented, k_final, seed)
    final = stage("final_segment", segment, consensus, min_size, connectivity)
    final.method = "ensemble"
    final.params = {
        "k_base": k_base,
        "k_final": consensus.params["k_final"],
        "min_size": min_size,
        "seed": seed,
        "eigenvalues": consensus.params["eigenvalues"],
        "stages": {"base": base, "segmented": segmented, "consensus": consensus},
    }
    return final


def component_ground_truth(truth, grid_shape, connectivity=4):
    """Split a phase map into connected components for position-aware scoring."""
    lab = Labeling(np.asarray(truth).ravel(), grid_shape=grid_shape)
    return connected_components(lab, connectivity).labels
