"""From scattered displacement markers to per-node kinematic features.

Markers are first interpolated onto a regular ``R x R`` grid by local moving
least squares, then differentiated on the grid to obtain the displacement
gradient and the strain measures derived from it.

Grid nodes are stored row-major with the row index following ``y``: node
``(i, j)`` sits at ``(j h, i h)`` with ``h = 1 / (R - 1)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

FEATURE_KINDS = {
    "displacement": ("u_x", "u_y"),
    "deformation_gradient": ("F11", "F12", "F21", "F22"),
    "green_lagrange": ("E11", "E22", "E12"),
    "invariants": ("I1", "I2"),
}

# invariants and strains keep their physical scale unless asked otherwise
DEFAULT_STANDARDIZE = {
    "displacement": True,
    "deformation_gradient": True,
    "green_lagrange": False,
    "invariants": False,
}

MAX_INVALID_FRACTION = 0.01
COVERAGE_RADIUS = 0.25


@dataclass
class MarkerSet:
    positions: np.ndarray
    displacements: np.ndarray
    source: str = "external"

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.displacements = np.asarray(self.displacements, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValidationError("marker positions must be (n, 2)")
        if self.displacements.shape != self.positions.shape:
            raise ValidationError("marker displacements must match positions")
        if len(self.positions) < 4:
            raise ValidationError("need at least 4 markers")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.displacements))):
            raise ValidationError("marker data must be finite")
        if self.positions.min() < -1e-12 or self.positions.max() > 1 + 1e-12:
            raise ValidationError("marker positions must lie in the unit square")

    def __len__(self):
        return len(self.positions)


@dataclass
class GridField:
    R: int
    points: np.ndarray
    displacement: np.ndarray
    grad_u: np.ndarray | None = None
    F: np.ndarray | None = None
    C: np.ndarray | None = None
    E: np.ndarray | None = None
    I1: np.ndarray | None = None
    I2: np.ndarray | None = None
    invalid: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (self.R, self.R)

    @property
    def spacing(self):
        return 1.0 / (self.R - 1)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    kind: str
    columns: tuple
    grid_shape: tuple | None = None
    standardized: bool = False
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    zero_variance: np.ndarray | None = None
    n_imputed: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("feature values must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature matrix contains non-finite entries")
        if self.grid_shape is not None and np.prod(self.grid_shape) != len(self.values):
            raise ValidationError("grid shape does not match the row count")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


def _grid(R):
    xs = np.linspace(0.0, 1.0, R)
    X, Y = np.meshgrid(xs, xs)
    return np.column_stack([X.ravel(), Y.ravel()])


def _weighted_fit(rel, w, values, n_basis, rcond):
    """Solve the batched weighted least-squares problems; return fitted values at
    the origin and a mask of well-conditioned fits."""
    dx, dy = rel[..., 0], rel[..., 1]
    cols = [np.ones_like(dx), dx, dy, dx * dx, dx * dy, dy * dy][:n_basis]
    P = np.stack(cols, axis=-1)
    sw = np.sqrt(w)[..., None]
    U, s, Vt = np.linalg.svd(P * sw, full_matrices=False)
    ok = s[:, -1] > rcond * s[:, 0]
    s_inv = np.where(s > rcond * s[:, :1], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    proj = np.einsum("nkj,nkc->njc", U, values * sw)
    # value at the centre is the constant coefficient: row 0 of V
    fitted = np.einsum("nj,nj,njc->nc", Vt[:, :, 0], s_inv, proj)
    return fitted, ok


def interpolate_to_grid(markers: MarkerSet, R=89, k=16, rcond=1e-10):
    """Moving-least-squares interpolation of marker displacements onto a grid.

    Each grid node fits a quadratic polynomial to its ``k`` nearest markers
    with a compactly supported weight and takes the fit's value at the node.
    Rank-deficient neighbourhoods fall back to a linear fit, then to inverse
    distance weighting; the counts land in ``GridField.info``.
    """
    if k < 6:
        raise ValidationError("need k >= 6 neighbours for a quadratic basis")
    if R < 3:
        raise ValidationError("grid size must be >= 3")
    if k > len(markers):
        raise ValidationError(f"k={k} exceeds the number of markers ({len(markers)})")
    pts = _grid(R)
    tree = cKDTree(markers.positions)
    dist, idx = tree.query(pts, k=k)
    far = dist[:, -1] > COVERAGE_RADIUS
    if far.any():
        warnings.warn(
            f"{int(far.sum())} grid nodes lack {k} markers within {COVERAGE_RADIUS}", RuntimeWarning, stacklevel=2
        )
    support = 1.1 * dist[:, -1] + 1e-300
    rel = (markers.positions[idx] - pts[:, None, :]) / support[:, None, None]
    w = (1.0 - (dist / support[:, None]) ** 2) ** 2
    vals = markers.displacements[idx]

    out, ok = _weighted_fit(rel, w, vals, 6, rcond)
    n_linear = n_idw = 0
    if not ok.all():
        bad = np.flatnonzero(~ok)
        lin, ok_lin = _weighted_fit(rel[bad], w[bad], vals[bad], 3, rcond)
        out[bad] = lin
        n_linear = int(ok_lin.sum())
        worst = bad[~ok_lin]
        if len(worst):
            inv = 1.0 / np.maximum(dist[worst], 1e-300)
            out[worst] = np.einsum("nk,nkc->nc", inv / inv.sum(axis=1, keepdims=True), vals[worst])
            exact = dist[worst, 0] < 1e-14
            out[worst[exact]] = vals[worst[exact], 0]
            n_idw = len(worst)
    info = {"k": int(k), "fallback_linear": n_linear, "fallback_idw": n_idw, "uncovered_nodes": int(far.sum())}
    return GridField(R=R, points=pts, displacement=out, info=info)


def displacement_gradient(grid: GridField):
    """Per-node ``grad u`` with ``grad_u[n, a, J] = d u_a / d X_J``.

    Second-order central differences inside, second-order one-sided at edges.
    """
    R, h = grid.R, grid.spacing
    U = grid.displacement.reshape(R, R, 2)
    grad = np.empty((R, R, 2, 2))
    for a in range(2):
        d_dy, d_dx = np.gradient(U[..., a], h, edge_order=2)
        grad[..., a, 0] = d_dx
        grad[..., a, 1] = d_dy
    return grad.reshape(R * R, 2, 2)


def strain_tensors(grad_u):
    """Return ``(F, C, E, invalid)`` where ``invalid`` flags ``det F <= 0``."""
    grad_u = np.asarray(grad_u, dtype=float)
    F = grad_u + np.eye(2)
    C = np.einsum("...kI,...kJ->...IJ", F, F)
    E = 0.5 * (C - np.eye(2))
    detF = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    return F, C, E, ~(detF > 0)


def invariants(C):
    """``(I1, I2)`` of a 2x2 right Cauchy-Green tensor field."""
    C = np.asarray(C, dtype=float)
    trC = np.trace(C, axis1=-2, axis2=-1)
    trC2 = np.einsum("...ij,...ji->...", C, C)
    return trC, 0.5 * (trC**2 - trC2)


def compute_kinematics(grid: GridField):
    """Fill in every derived tensor of ``grid`` in place and return it."""
    grid.grad_u = displacement_gradient(grid)
    grid.F, grid.C, grid.E, grid.invalid = strain_tensors(grid.grad_u)
    grid.I1, grid.I2 = invariants(grid.C)
    return grid


def _raw_features(grid, kind):
    if kind == "displacement":
        return grid.displacement.copy()
    if kind == "deformation_gradient":
        return grid.F.reshape(-1, 4).copy()
    if kind == "green_lagrange":
        E = grid.E
        return np.column_stack([E[:, 0, 0], E[:, 1, 1], E[:, 0, 1]])
    return np.column_stack([grid.I1, grid.I2])


def _impute(values, invalid, R):
    """Replace invalid rows by the mean of their valid 8-neighbours."""
    out = values.copy()
    bad = np.flatnonzero(invalid)
    for n in bad:
        i, j = divmod(int(n), R)
        neigh = [
            (i + di) * R + (j + dj)
            for di in (-1, 0, 1)
            for dj in (-1, 0, 1)
            if (di or dj) and 0 <= i + di < R and 0 <= j + dj < R
        ]
        neigh = [m for m in neigh if not invalid[m]]
        if not neigh:
            raise ValidationError(f"grid node {n} has no valid neighbour to impute from")
        out[n] = values[neigh].mean(axis=0)
    return out


def standardize_columns(values):
    """Z-score each column; constant columns become 0 and are flagged."""
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    zero = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    scale = np.where(zero, 1.0, std)
    out = (values - mean) / scale
    out[:, zero] = 0.0
    return out, mean, scale, zero


def assemble_features(grid: GridField, kind="invariants", standardize=None):
    """Stack the unique components of one kinematic quantity per grid node."""
    if kind not in FEATURE_KINDS:
        raise ValidationError(f"unknown feature kind {kind!r}; expected one of {tuple(FEATURE_KINDS)}")
    if kind != "displacement" and grid.F is None:
        compute_kinematics(grid)
    if standardize is None:
        standardize = DEFAULT_STANDARDIZE[kind]
    values = _raw_features(grid, kind)
    n_imputed = 0
    if kind != "displacement" and grid.invalid is not None and grid.invalid.any():
        n_imputed = int(grid.invalid.sum())
        if n_imputed > MAX_INVALID_FRACTION * len(values):
            raise ValidationError(
                f"{n_imputed} of {len(values)} grid nodes have det F <= 0 (limit {MAX_INVALID_FRACTION:.0%})"
            )
        values = _impute(values, grid.invalid, grid.R)
    mean = scale = zero = None
    if standardize:
        values, mean, scale, zero = standardize_columns(values)
    return FeatureMatrix(
        values=values,
        kind=kind,
        columns=FEATURE_KINDS[kind],
        grid_shape=grid.shape,
        standardized=bool(standardize),
        mean=mean,
        scale=scale,
        zero_variance=zero,
        n_imputed=n_imputed,
    )


def markers_to_features(markers: MarkerSet, kind="invariants", R=89, k=16, standardize=None):
    """Convenience: grid, differentiate and assemble in one call."""
    grid = compute_kinematics(interpolate_to_grid(markers, R=R, k=k))
    return assemble_features(grid, kind, standardize), grid
