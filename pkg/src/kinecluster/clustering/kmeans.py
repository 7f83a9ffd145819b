"""Lloyd's k-means with k-means++ seeding."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError
from .labeling import Labeling


def _values(features):
    values = getattr(features, "values", features)
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _sq_dists(X, centers):
    if len(centers) * X.shape[1] <= 64:
        diff = X[:, None, :] - centers[None, :, :]
        return np.einsum("nkd,nkd->nk", diff, diff)
    sx = np.einsum("nd,nd->n", X, X)
    sc = np.einsum("kd,kd->k", centers, centers)
    return np.maximum(sx[:, None] + sc[None, :] - 2.0 * X @ centers.T, 0.0)


def wcss(X, labels, centers=None):
    """Within-cluster sum of squares; centers default to the cluster means."""
    X = _values(X)
    labels = np.asarray(labels)
    if centers is None:
        centers = np.array([X[labels == j].mean(axis=0) for j in range(labels.max() + 1)])
    d = X - centers[labels]
    return math.fsum(np.einsum("nd,nd->n", d, d))


def kmeans_plusplus(X, k, rng):
    """D^2-weighted seeding; returns indices of the chosen rows."""
    n = len(X)
    chosen = [int(rng.integers(n))]
    closest = np.einsum("nd,nd->n", X - X[chosen[0]], X - X[chosen[0]])
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        d = X - X[idx]
        closest = np.minimum(closest, np.einsum("nd,nd->n", d, d))
    return np.array(chosen)


def _cluster_means(X, labels, centers):
    counts = np.bincount(labels, minlength=len(centers))
    out = centers.copy()
    filled = counts > 0
    for c in range(X.shape[1]):
        sums = np.bincount(labels, weights=X[:, c], minlength=len(centers))
        out[filled, c] = sums[filled] / counts[filled]
    return out


def lloyd(X, centers, max_iter=300, tol=1e-4):
    """Run Lloyd iterations from ``centers``.

    Returns ``(labels, centers, history, n_iter)`` where ``history`` holds the
    objective after every assignment step. An empty cluster is re-seeded at
    the point farthest from its current center, taken from a cluster that
    can spare it; with fewer distinct points than clusters some stay empty.
    Iteration stops once the assignment repeats or the squared center shift
    drops below ``tol`` times the mean per-column variance of ``X``.
    """
    shift_tol = tol * float(np.mean(X.var(axis=0))) if tol > 0 else 0.0
    centers = np.array(centers, dtype=float, copy=True)
    k = len(centers)
    rows = np.arange(len(X))
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, centers)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = np.where(counts[new] > 1, d2[rows, new], -1.0)
            far = int(np.argmax(own))
            if own[far] <= 0:
                break
            counts[new[far]] -= 1
            new[far] = j
            counts[j] = 1
            centers[j] = X[far]
            diff = X - centers[j]
            d2[:, j] = np.einsum("nd,nd->n", diff, diff)
        history.append(float(d2[rows, new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        moved = _cluster_means(X, labels, centers)
        shift = float(np.sum((moved - centers) ** 2))
        centers = moved
        if shift <= shift_tol:
            break
    return labels, centers, history, it


def kmeans(features, k, seed=0, max_iter=300, n_init=10, init=None, tol=1e-4):
    """Partition rows into ``k`` clusters minimizing the within-cluster sum of squares.

    Parameters
    ----------
    features : FeatureMatrix or array of shape (n, d)
    k : int
        Number of clusters, ``2 <= k <= n``.
    seed : int
        Seeds the k-means++ draws of every restart.
    n_init : int
        Independent restarts; the lowest objective wins (first on ties).
    init : array of shape (k, d), optional
        Explicit starting centers; disables k-means++ and restarts.
    tol : float
        Relative center-shift tolerance; 0 iterates until assignments repeat.

    Returns
    -------
    Labeling
        ``params`` carries ``objective``, per-iteration ``history`` and the
        final ``centers``.
    """
    X = _values(features)
    n = len(X)
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, n={n}], got {k}")
    if k < 2 and init is None:
        raise ValidationError("k must be >= 2")
    rng = np.random.default_rng(seed)
    starts = [np.asarray(init, dtype=float)] if init is not None else None
    if starts is None:
        starts = [X[kmeans_plusplus(X, k, rng)] for _ in range(max(1, n_init))]

    best = None
    for start in starts:
        labels, centers, history, n_iter = lloyd(X, start, max_iter, tol)
        objective = wcss(X, labels, centers)
        if best is None or objective < best[0]:
            best = (objective, labels, centers, history, n_iter)

    objective, labels, centers, history, n_iter = best
    return Labeling(
        labels=labels,
        k=k,
        grid_shape=getattr(features, "grid_shape", None),
        method="kmeans",
        params={
            "k": k,
            "seed": seed,
            "n_init": n_init,
            "max_iter": max_iter,
            "tol": tol,
            "objective": objective,
            "history": history,
            "n_iter": n_iter,
            "centers": centers,
        },
    )
