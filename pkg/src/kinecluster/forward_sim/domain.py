"""Structured triangular meshes carrying a two-phase material assignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .materials import lame_parameters
from .patterns import PatternSpec

MIN_RESOLUTION = 8

DEFAULT_MATERIALS = ((1.0, 0.3), (10.0, 0.3))


def structured_mesh(n):
    """Unit-square mesh with ``n x n`` cells, two triangles per cell.

    The cell diagonal alternates in a checkerboard so the mesh has no global
    directional bias. Node ``(i, j)`` (x index ``i``, y index ``j``) has id
    ``j * (n + 1) + i``; cell ``(i, j)`` owns elements ``2 * (j * n + i) + {0, 1}``.
    """
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    n00 = j * (n + 1) + i
    n10 = n00 + 1
    n01 = n00 + (n + 1)
    n11 = n01 + 1
    even = (i + j) % 2 == 0
    t0 = np.where(even[:, None], np.column_stack([n00, n10, n11]), np.column_stack([n00, n10, n01]))
    t1 = np.where(even[:, None], np.column_stack([n00, n11, n01]), np.column_stack([n10, n11, n01]))
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = t0
    elements[1::2] = t1
    return nodes, elements


def element_geometry(nodes, elements):
    """Reference-configuration shape-function gradients ``(E, 3, 2)`` and areas."""
    X = nodes[elements]
    d1 = X[:, 1] - X[:, 0]
    d2 = X[:, 2] - X[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        raise ValidationError("mesh contains degenerate or clockwise elements")
    # inverse of [d1 d2] (columns); gradients of N1, N2 are its rows
    inv = np.empty((len(elements), 2, 2))
    inv[:, 0, 0] = d2[:, 1] / det
    inv[:, 0, 1] = -d2[:, 0] / det
    inv[:, 1, 0] = -d1[:, 1] / det
    inv[:, 1, 1] = d1[:, 0] / det
    grads = np.empty((len(elements), 3, 2))
    grads[:, 1] = inv[:, 0]
    grads[:, 2] = inv[:, 1]
    grads[:, 0] = -(grads[:, 1] + grads[:, 2])
    return grads, 0.5 * det


@dataclass
class MaterialDomain:
    pattern: PatternSpec
    resolution: int
    materials: tuple
    nodes: np.ndarray
    elements: np.ndarray
    phase: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    grads: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def ground_truth(self, points):
        """Analytic phase label (0/1) for arbitrary query points."""
        return self.pattern.labels(points)

    def ground_truth_grid(self, R=89):
        """Phase labels on the ``R x R`` grid in row-major order (rows = y)."""
        return self.ground_truth(grid_points(R))

    def locate(self, points):
        """Element index and barycentric coordinates of each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.resolution
        ci = np.clip(np.floor(pts[:, 0] * n).astype(np.int64), 0, n - 1)
        cj = np.clip(np.floor(pts[:, 1] * n).astype(np.int64), 0, n - 1)
        first = 2 * (cj * n + ci)
        best_elem = first.copy()
        best_bary = None
        best_score = np.full(len(pts), -np.inf)
        for offset in (0, 1):
            e = first + offset
            bary = self._barycentric(e, pts)
            score = bary.min(axis=1)
            take = score > best_score
            best_elem[take] = e[take]
            best_bary = bary if best_bary is None else np.where(take[:, None], bary, best_bary)
            best_score = np.maximum(best_score, score)
        return best_elem, best_bary

    def _barycentric(self, elems, pts):
        X = self.nodes[self.elements[elems]]
        grads = self.grads[elems]
        rel = pts - X[:, 0]
        l1 = np.einsum("ej,ej->e", grads[:, 1], rel)
        l2 = np.einsum("ej,ej->e", grads[:, 2], rel)
        return np.column_stack([1.0 - l1 - l2, l1, l2])

    def phase_at(self, points):
        """Phase of the mesh element containing each point."""
        elems, _ = self.locate(points)
        return self.phase[elems]


def grid_points(R):
    """Row-major ``R x R`` lattice over the unit square; row index follows y."""
    xs = np.linspace(0.0, 1.0, R)
    X, Y = np.meshgrid(xs, xs)
    return np.column_stack([X.ravel(), Y.ravel()])


def build_domain(pattern: PatternSpec, resolution=64, materials=DEFAULT_MATERIALS):
    """Mesh the unit square and assign each element its phase and Lame pair.

    ``materials`` is ``((E_background, nu_background), (E_inclusion, nu_inclusion))``.
    An element belongs to the inclusion iff its centroid does.
    """
    if int(resolution) != resolution or resolution < MIN_RESOLUTION:
        raise ValidationError(f"resolution must be an integer >= {MIN_RESOLUTION}")
    resolution = int(resolution)
    if len(materials) != 2:
        raise ValidationError("materials must give (E, nu) for both phases")
    lame = [lame_parameters(float(E), float(nu)) for E, nu in materials]

    nodes, elements = structured_mesh(resolution)
    grads, areas = element_geometry(nodes, elements)
    centroids = nodes[elements].mean(axis=1)
    phase = pattern.labels(centroids)
    mu = np.where(phase == 1, lame[1][0], lame[0][0])
    lam = np.where(phase == 1, lame[1][1], lame[0][1])
    return MaterialDomain(
        pattern=pattern,
        resolution=resolution,
        materials=tuple((float(E), float(nu)) for E, nu in materials),
        nodes=nodes,
        elements=elements,
        phase=phase,
        mu=mu,
        lam=lam,
        grads=grads,
        areas=areas,
    )
