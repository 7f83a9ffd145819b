"""Cluster assignments and the Adjusted Rand Index."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

UNLABELED = -1


@dataclass
class Labeling:
    """Integer cluster id per row.

    ``UNLABELED`` (-1) marks rows a clusterer left unassigned; every other id
    lies in ``[0, k)``. ``flags`` records degenerate outcomes such as
    ``"empty_cluster"`` instead of raising.
    """

    labels: np.ndarray
    k: int | None = None
    grid_shape: tuple | None = None
    method: str = "given"
    params: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 1:
            self.labels = self.labels.ravel()
        if self.labels.size and not np.issubdtype(self.labels.dtype, np.integer):
            as_int = self.labels.astype(np.int64)
            if not np.array_equal(as_int, self.labels):
                raise ValidationError("labels must be integers")
            self.labels = as_int
        self.labels = self.labels.astype(np.int64, copy=False)
        if self.labels.size and self.labels.min() < UNLABELED:
            raise ValidationError("labels must be >= -1")
        top = int(self.labels.max()) + 1 if self.labels.size else 0
        if self.k is None:
            self.k = top
        if top > self.k:
            raise ValidationError(f"label {top - 1} out of range for k={self.k}")
        if self.grid_shape is not None:
            self.grid_shape = tuple(int(s) for s in self.grid_shape)
            if int(np.prod(self.grid_shape)) != len(self.labels):
                raise ValidationError("grid shape does not match the number of labels")
        used = np.unique(self.labels[self.labels >= 0])
        if len(used) < self.k and "empty_cluster" not in self.flags:
            self.flags.append("empty_cluster")

    def __len__(self):
        return len(self.labels)

    @property
    def sizes(self):
        return np.bincount(self.labels[self.labels >= 0], minlength=self.k)

    def image(self):
        if self.grid_shape is None:
            raise ValidationError("labeling has no grid shape")
        return self.labels.reshape(self.grid_shape)


def as_labels(x):
    if isinstance(x, Labeling):
        return x.labels
    arr = np.asarray(x)
    if arr.ndim != 1:
        arr = arr.ravel()
    return arr


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int


def contingency_table(X, Y):
    """Cross-tabulate two labelings (arbitrary hashable-free integer ids)."""
    x, y = as_labels(X), as_labels(Y)
    if len(x) != len(y):
        raise ValidationError(f"labelings differ in length ({len(x)} vs {len(y)})")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    r = int(xi.max()) + 1 if len(xi) else 0
    s = int(yi.max()) + 1 if len(yi) else 0
    counts = np.bincount(xi * s + yi, minlength=r * s).reshape(r, s) if r and s else np.zeros((r, s), np.int64)
    return ContingencyTable(counts, counts.sum(axis=1), counts.sum(axis=0), int(len(x)))


def _comb2(v):
    v = np.asarray(v, dtype=np.int64)
    return int(np.sum(v * (v - 1) // 2))


def adjusted_rand_index(X, Y):
    """Chance-corrected pair-counting agreement between two labelings.

    Symmetric, invariant to relabeling, 1 for identical partitions and about
    0 for independent random ones.
    """
    table = contingency_table(X, Y)
    n = table.n
    sum_ij = _comb2(table.counts)
    sum_a = _comb2(table.row_sums)
    sum_b = _comb2(table.col_sums)
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        # both partitions trivial (one cluster, or all singletons)
        return 1.0
    return float((sum_ij - expected) / (maximum - expected))
