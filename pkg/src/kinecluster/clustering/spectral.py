"""Spectral clustering on the random-walk normalized graph Laplacian.

Eigenvectors of ``L_rw = I - D^-1 A`` with the smallest eigenvalues are the
eigenvectors of ``D^-1 A`` with the largest ones. They are obtained from the
symmetric similarity transform ``D^-1/2 A D^-1/2`` and mapped back with
``D^-1/2``.

Affinities may be dense arrays, scipy sparse matrices, scipy
``LinearOperator`` objects, or low-rank operators exposing
``normalized_factor(degrees)`` (see :class:`kinecluster.ensemble.SimilarityOperator`).
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.spatial import cKDTree

from ..errors import ClusteringError, ValidationError
from .kmeans import _values, kmeans
from .labeling import Labeling

DENSE_LIMIT = 3000
KNN_NEIGHBORS = 32
ISOLATED_LOOP = 1e-12


def rbf_affinity(X, gamma=1.0):
    """Dense ``A_ij = exp(-gamma |x_i - x_j|^2)``."""
    X = _values(X)
    sq = np.einsum("nd,nd->n", X, X)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    return np.exp(-gamma * d2)


def knn_rbf_affinity(X, gamma=1.0, n_neighbors=KNN_NEIGHBORS):
    """Sparse symmetric k-NN graph with RBF edge weights (union of neighbourhoods)."""
    X = _values(X)
    n = len(X)
    m = min(n_neighbors + 1, n)
    dist, idx = cKDTree(X).query(X, k=m)
    rows = np.repeat(np.arange(n), m)
    W = sp.coo_matrix((np.exp(-gamma * dist.ravel() ** 2), (rows, idx.ravel())), shape=(n, n)).tocsr()
    return W.maximum(W.T).tocsr()


def random_walk_matrix(A):
    """Dense ``D^-1 A`` (rows sum to one)."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float)
    return A / A.sum(axis=1, keepdims=True)


def _degrees(A, n):
    if hasattr(A, "degrees"):
        return np.asarray(A.degrees(), dtype=float)
    if isinstance(A, LinearOperator):
        return A.matvec(np.ones(n))
    return np.asarray(A.sum(axis=1)).ravel()


def _check_affinity(A):
    if isinstance(A, LinearOperator) or hasattr(A, "normalized_factor"):
        return A
    if sp.issparse(A):
        A = A.tocsr()
        if (abs(A - A.T) > 1e-10 * max(abs(A).max(), 1.0)).nnz:
            raise ValidationError("affinity must be symmetric")
        if A.nnz and A.data.min() < 0:
            raise ValidationError("affinity must be non-negative")
        return A
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("affinity must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-10 * max(np.abs(A).max(), 1.0)):
        raise ValidationError("affinity must be symmetric")
    if A.min() < 0:
        raise ValidationError("affinity must be non-negative")
    return A


def spectral_embedding(A, k, seed=0):
    """Top-``k`` eigenpairs of ``D^-1 A``.

    Returns ``(eigenvalues, vectors)`` with eigenvalues in descending order
    and vectors as the columns of an ``(n, k)`` array (random-walk
    eigenvectors, i.e. ``D^-1/2`` times the symmetric ones).
    """
    A = _check_affinity(A)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    deg = _degrees(A, n)
    isolated = deg <= 0
    if isolated.any():
        warnings.warn(
            f"{int(isolated.sum())} isolated vertices; adding self-loops of weight {ISOLATED_LOOP}",
            RuntimeWarning,
            stacklevel=2,
        )
    loops = np.where(isolated, ISOLATED_LOOP, 0.0)
    deg = deg + loops
    d_isqrt = 1.0 / np.sqrt(deg)

    if hasattr(A, "normalized_factor"):
        # S = M M^T exactly; its leading eigenvectors are the left singular vectors of M
        M = A.normalized_factor(deg)
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        vals = s**2
        if isolated.any():
            # isolated vertices carry only their self-loop: eigenvalue exactly 1, unit vector
            extra = np.zeros((n, int(isolated.sum())))
            extra[np.flatnonzero(isolated), np.arange(extra.shape[1])] = 1.0
            U = np.hstack([U, extra])
            vals = np.concatenate([vals, np.ones(extra.shape[1])])
        order = np.argsort(-vals, kind="stable")
        if len(order) < k:
            # rank-deficient: pad with an orthonormal complement (eigenvalue 0)
            Q, _ = np.linalg.qr(np.hstack([U, np.random.default_rng(seed).standard_normal((n, k - len(order)))]))
            U = np.hstack([U[:, order], Q[:, len(order) : k]])
            vals = np.concatenate([vals[order], np.zeros(k - len(order))])
            order = np.arange(k)
        vals, vecs = vals[order][:k], U[:, order][:, :k]
    elif isinstance(A, LinearOperator) or sp.issparse(A):
        if sp.issparse(A):
            Dm = sp.diags(d_isqrt)
            N = (Dm @ (A + sp.diags(loops)) @ Dm).tocsr()
            op = N
        else:
            op = LinearOperator(
                (n, n), matvec=lambda v: d_isqrt * (A.matvec(d_isqrt * v) + loops * d_isqrt * v), dtype=float
            )
        if n <= max(k + 2, 64):
            dense = op.toarray() if sp.issparse(op) else op @ np.eye(n)
            w, V = np.linalg.eigh(0.5 * (dense + dense.T))
            vals, vecs = w[::-1][:k], V[:, ::-1][:, :k]
        else:
            v0 = np.sqrt(deg) / np.linalg.norm(np.sqrt(deg))
            try:
                w, V = eigsh(op, k=k, which="LA", v0=v0, tol=1e-10, maxiter=20 * n)
            except Exception as exc:  # ArpackNoConvergence and friends
                raise ClusteringError(f"eigensolver failed: {exc}", stage="spectral") from exc
            order = np.argsort(-w, kind="stable")
            vals, vecs = w[order], V[:, order]
    else:
        N = d_isqrt[:, None] * (A + np.diag(loops)) * d_isqrt[None, :]
        w, V = np.linalg.eigh(0.5 * (N + N.T))
        vals, vecs = w[::-1][:k], V[:, ::-1][:, :k]

    vecs = d_isqrt[:, None] * vecs
    # fix signs so the output is reproducible across LAPACK/ARPACK runs
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return np.asarray(vals, dtype=float), vecs * signs


def spectral(
    features=None,
    k=2,
    gamma=1.0,
    seed=0,
    affinity=None,
    n_neighbors=KNN_NEIGHBORS,
    dense_limit=DENSE_LIMIT,
    n_init=10,
):
    """Cluster via k-means on the leading random-walk eigenvectors.

    Pass either ``features`` (an RBF affinity with ``gamma`` is built: dense
    up to ``dense_limit`` rows, a k-NN graph above) or a precomputed
    ``affinity``.
    """
    if k < 2:
        raise ValidationError("k must be >= 2")
    if (features is None) == (affinity is None):
        raise ValidationError("pass exactly one of features or affinity")
    grid_shape = getattr(features, "grid_shape", None)
    mode = "precomputed"
    if affinity is None:
        X = _values(features)
        if len(X) <= dense_limit:
            affinity, mode = rbf_affinity(X, gamma), "rbf_dense"
        else:
            affinity, mode = knn_rbf_affinity(X, gamma, n_neighbors), "rbf_knn"
    vals, vecs = spectral_embedding(affinity, k, seed=seed)
    inner = kmeans(vecs, k, seed=seed, n_init=n_init)
    return Labeling(
        labels=inner.labels,
        k=k,
        grid_shape=grid_shape,
        method="spectral",
        params={"k": k, "gamma": gamma, "seed": seed, "affinity": mode, "eigenvalues": vals},
    )
