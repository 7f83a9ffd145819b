"""Isolation forest anomaly scoring, used as a two-cluster labeler."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .kmeans import _values
from .labeling import Labeling

EULER_GAMMA = 0.5772156649015329


def average_path_length(m):
    """Expected path length of an unsuccessful BST search among ``m`` points."""
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    two = m == 2
    big = m > 2
    out[two] = 1.0
    mb = m[big]
    out[big] = 2.0 * (np.log(mb - 1.0) + EULER_GAMMA) - 2.0 * (mb - 1.0) / mb
    return out if out.ndim else float(out)


@dataclass
class IsolationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    def path_lengths(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return self.depth[node] + average_path_length(self.size[node])


def build_tree(X, rng, height_limit):
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(n, d):
        for lst, v in ((feature, 0), (threshold, 0.0), (left, -1), (right, -1), (size, n), (depth, d)):
            lst.append(v)
        return len(size) - 1

    stack = [(new_node(len(X), 0), np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        d = depth[node]
        if d >= height_limit or len(rows) <= 1:
            continue
        sub = X[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if len(splittable) == 0:
            continue
        q = int(splittable[rng.integers(len(splittable))])
        p = lo[q] + (hi[q] - lo[q]) * rng.random()
        if p <= lo[q]:
            p = np.nextafter(lo[q], hi[q])
        mask = sub[:, q] < p
        feature[node], threshold[node] = q, p
        li = new_node(int(mask.sum()), d + 1)
        ri = new_node(int((~mask).sum()), d + 1)
        left[node], right[node] = li, ri
        stack.append((ri, rows[~mask]))
        stack.append((li, rows[mask]))
    return IsolationTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(size, dtype=float),
        np.array(depth, dtype=float),
    )


@dataclass
class IsolationForest:
    trees: list
    subsample: int

    def score_samples(self, X):
        """Anomaly score ``2 ** (-E[h(x)] / c(subsample))`` in (0, 1)."""
        X = _values(X)
        h = np.zeros(len(X))
        for tree in self.trees:
            h += tree.path_lengths(X)
        h /= len(self.trees)
        return 2.0 ** (-h / average_path_length(self.subsample))


def fit_isolation_forest(X, trees=100, subsample=256, seed=0):
    X = _values(X)
    n = len(X)
    if n < 8:
        raise ValidationError("isolation forest needs at least 8 rows")
    psi = min(subsample, n)
    limit = math.ceil(math.log2(psi))
    rng = np.random.default_rng(seed)
    forest = []
    for _ in range(trees):
        rows = rng.choice(n, size=psi, replace=False)
        forest.append(build_tree(X[rows], rng, limit))
    return IsolationForest(forest, psi)


def iforest(features, trees=100, subsample=256, seed=0, contamination=None):
    """Label rows anomalous (1) or normal (0) by isolation depth.

    Rows scoring above 0.5 are anomalous unless ``contamination`` is given,
    in which case the top fraction of scores is.
    """
    X = _values(features)
    forest = fit_isolation_forest(X, trees, subsample, seed)
    scores = forest.score_samples(X)
    flags = []
    if np.ptp(scores) == 0:
        flags.append("single_cluster")
    if contamination is None:
        labels = (scores > 0.5).astype(np.int64)
    else:
        if not 0 < contamination < 0.5:
            raise ValidationError("contamination must lie in (0, 0.5)")
        n_out = int(round(contamination * len(X)))
        order = np.argsort(-scores, kind="stable")
        labels = np.zeros(len(X), dtype=np.int64)
        labels[order[:n_out]] = 1
    return Labeling(
        labels=labels,
        k=2,
        grid_shape=getattr(features, "grid_shape", None),
        method="iforest",
        params={"trees": trees, "subsample": subsample, "seed": seed, "contamination": contamination, "scores": scores},
        flags=flags,
    )
