"""nu one-class SVM with an RBF kernel, trained by SMO.

Dual problem (box-scaled as in LIBSVM)::

    min_a  1/2 a^T Q a   s.t.  0 <= a_i <= 1,  sum(a) = nu * n

with ``Q_ij = exp(-gamma |x_i - x_j|^2)``. The decision function is
``f(x) = sum_i a_i K(x_i, x) - rho``; points with ``f < 0`` are anomalous.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .kmeans import _values
from .labeling import Labeling

TAU = 1e-12


def scale_gamma(X):
    """``1 / (d * Var(X))`` over all entries; 1.0 for constant data."""
    X = _values(X)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def rbf_kernel(A, B, gamma):
    sa = np.einsum("nd,nd->n", A, A)
    sb = np.einsum("nd,nd->n", B, B)
    d2 = np.maximum(sa[:, None] + sb[None, :] - 2.0 * A @ B.T, 0.0)
    return np.exp(-gamma * d2)


class _KernelRows:
    """LRU cache of kernel matrix rows."""

    def __init__(self, X, gamma, capacity):
        self.X, self.gamma, self.capacity = X, gamma, capacity
        self._rows = OrderedDict()

    def __getitem__(self, i):
        row = self._rows.get(i)
        if row is None:
            row = rbf_kernel(self.X[i : i + 1], self.X, self.gamma)[0]
            self._rows[i] = row
            if len(self._rows) > self.capacity:
                self._rows.popitem(last=False)
        else:
            self._rows.move_to_end(i)
        return row


@dataclass
class OneClassSVM:
    support: np.ndarray
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int
    n_iter: int
    gap: float

    def decision_function(self, X, chunk=2048):
        X = _values(X)
        out = np.empty(len(X))
        for s in range(0, len(X), chunk):
            out[s : s + chunk] = rbf_kernel(X[s : s + chunk], self.support, self.gamma) @ self.alpha
        return out - self.rho

    @property
    def dual_objective(self):
        """``1/2 b^T K b`` for the sum-to-one scaling ``b = a / (nu n)``."""
        b = self.alpha / (self.nu * self.n_train)
        return 0.5 * float(b @ rbf_kernel(self.support, self.support, self.gamma) @ b)


def _initial_gradient(X, alpha, gamma, chunk=1024):
    nz = np.flatnonzero(alpha)
    G = np.zeros(len(X))
    for s in range(0, len(X), chunk):
        G[s : s + chunk] = rbf_kernel(X[s : s + chunk], X[nz], gamma) @ alpha[nz]
    return G


def fit_one_class_svm(X, nu=0.2, gamma=None, tol=1e-4, max_iter=None, cache_rows=1024):
    X = _values(X)
    n = len(X)
    if not 0 < nu < 1:
        raise ValidationError("nu must lie in (0, 1)")
    if gamma is None:
        gamma = scale_gamma(X)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)

    total = nu * n
    alpha = np.zeros(n)
    full = int(total)
    alpha[:full] = 1.0
    if full < n:
        alpha[full] = total - full
    G = _initial_gradient(X, alpha, gamma)
    Q = _KernelRows(X, gamma, cache_rows)
    # diag of an RBF Gram matrix is 1

    gap = np.inf
    for it in range(max_iter):
        up = alpha < 1.0
        low = alpha > 0.0
        neg = -G
        i = int(np.flatnonzero(up)[np.argmax(neg[up])])
        g_max = neg[i]
        g_min = neg[low].min()
        gap = g_max - g_min
        if gap < tol:
            break
        Qi = Q[i]
        # second-order working-set selection for j
        cand = low & (neg < g_max)
        b = g_max + G[cand]
        a = np.maximum(2.0 - 2.0 * Qi[cand], TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])
        Qj = Q[j]
        quad = max(2.0 - 2.0 * Qi[j], TAU)
        delta = (G[j] - G[i]) / quad
        delta = min(delta, 1.0 - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        G += delta * (Qi - Qj)
    else:
        raise ConvergenceError(
            f"SMO hit {max_iter} iterations with KKT gap {gap:.3e} (tol {tol:.1e})",
            stage="ocsvm",
            diagnostics={"gap": float(gap), "iterations": max_iter},
        )

    free = (alpha > 0) & (alpha < 1)
    if free.any():
        rho = float(G[free].mean())
    else:
        ub = G[alpha <= 0].min() if (alpha <= 0).any() else np.inf
        lb = G[alpha >= 1].max() if (alpha >= 1).any() else -np.inf
        rho = float(0.5 * (ub + lb))
    sv = alpha > 0
    return OneClassSVM(X[sv], alpha[sv], rho, float(gamma), nu, n, it, float(gap))


def ocsvm(features, nu=0.2, gamma=None, tol=1e-4, max_iter=None):
    """Label rows outside the learned support region as anomalous (1)."""
    X = _values(features)
    model = fit_one_class_svm(X, nu=nu, gamma=gamma, tol=tol, max_iter=max_iter)
    decision = model.decision_function(X)
    # margin support vectors sit at 0 only up to the KKT tolerance
    labels = (decision < -tol).astype(np.int64)
    return Labeling(
        labels=labels,
        k=2,
        grid_shape=getattr(features, "grid_shape", None),
        method="ocsvm",
        params={
            "nu": nu,
            "gamma": model.gamma,
            "rho": model.rho,
            "dual_objective": model.dual_objective,
            "n_support": int(len(model.alpha)),
            "n_iter": model.n_iter,
            "kkt_gap": model.gap,
            "decision": decision,
        },
    )
