"""Displacement boundary conditions on the unit square.

A condition resolves, for a given mesh, into a list of constrained degrees
of freedom and their fully-loaded prescribed values. Load stepping scales
those values linearly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

STANDARD_KINDS = ("equibiaxial", "uniaxial_x", "uniaxial_y", "shear", "confined_compression")
BC_KINDS = STANDARD_KINDS + ("biaxial", "random", "affine")
UNIAXIAL_KINDS = ("uniaxial_x", "uniaxial_y")
GRIPS = ("roller", "clamped")
EDGES = ("bottom", "right", "top", "left")

# per-coefficient uniform ranges for the randomized edge profile
RANDOM_RANGES = (
    (0.0, 0.2),
    (-0.1, 0.1),
    (-0.1, 0.1),
    (-0.1, 0.1),
    (-0.1, 0.1),
    (0.0, np.pi / 32),
    (0.0, 4 * np.pi),
    (0.0, 2 * np.pi),
)

DEFAULT_DELTA = 0.3


def edge_profile(coefficients, s):
    """Quartic-plus-sine edge profile evaluated at arclength ``s`` in [0, 1]."""
    c0, c1, c2, c3, c4, c5, c6, c7 = coefficients
    s = np.asarray(s, dtype=float)
    return c0 + c1 * s + c2 * s**2 + c3 * s**3 + c4 * s**4 + c5 * np.sin(c6 * (s - c7))


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    magnitude: float = DEFAULT_DELTA
    seed: int | None = None
    dx: float | None = None
    dy: float | None = None
    matrix: tuple | None = None
    grips: str = "roller"
    coefficients: dict = field(default_factory=dict)

    @property
    def name(self):
        if self.kind == "random":
            return f"random_{self.seed}"
        if self.kind == "biaxial":
            return f"biaxial_{self.dx:g}_{self.dy:g}"
        if self.kind in UNIAXIAL_KINDS and self.grips == "clamped":
            return f"{self.kind}_clamped"
        return self.kind

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind in STANDARD_KINDS:
            out["magnitude"] = self.magnitude
            if self.kind in UNIAXIAL_KINDS:
                out["grips"] = self.grips
        elif self.kind == "biaxial":
            out.update(dx=self.dx, dy=self.dy)
        elif self.kind == "affine":
            out["matrix"] = [list(r) for r in self.matrix]
        else:
            out["seed"] = self.seed
            out["coefficients"] = {k: list(map(float, v)) for k, v in self.coefficients.items()}
        return out

    def constraints(self, nodes, tol=1e-12):
        """Return ``(dofs, values)`` for the fully applied condition.

        Dof ``2 * node + c`` is displacement component ``c`` of ``node``.
        """
        X, Y = nodes[:, 0], nodes[:, 1]
        left = np.flatnonzero(np.abs(X) < tol)
        right = np.flatnonzero(np.abs(X - 1) < tol)
        bottom = np.flatnonzero(np.abs(Y) < tol)
        top = np.flatnonzero(np.abs(Y - 1) < tol)
        boundary = np.unique(np.concatenate([left, right, bottom, top]))
        fixed = {}

        def put(idx, comp, vals):
            vals = np.broadcast_to(np.asarray(vals, dtype=float), idx.shape)
            for n, v in zip(idx, vals):
                fixed[2 * int(n) + comp] = float(v)

        d = self.magnitude
        if self.kind == "equibiaxial":
            put(boundary, 0, d * (X[boundary] - 0.5))
            put(boundary, 1, d * (Y[boundary] - 0.5))
        elif self.kind == "biaxial":
            put(boundary, 0, self.dx * (X[boundary] - 0.5))
            put(boundary, 1, self.dy * (Y[boundary] - 0.5))
        elif self.kind == "affine":
            G = np.asarray(self.matrix, dtype=float) - np.eye(2)
            disp = nodes[boundary] @ G.T
            put(boundary, 0, disp[:, 0])
            put(boundary, 1, disp[:, 1])
        elif self.kind in UNIAXIAL_KINDS:
            c, s_coord = (0, Y) if self.kind == "uniaxial_x" else (1, X)
            lo, hi = (left, right) if c == 0 else (bottom, top)
            put(lo, c, -d / 2)
            put(hi, c, d / 2)
            if self.grips == "clamped":
                put(lo, 1 - c, 0.0)
                put(hi, 1 - c, 0.0)
            else:
                # rollers: pin the grip midpoints against rigid sliding
                for edge in (lo, hi):
                    mid = edge[np.argmin(np.abs(s_coord[edge] - 0.5))]
                    put(np.array([mid]), 1 - c, 0.0)
        elif self.kind == "shear":
            put(bottom, 0, 0.0)
            put(bottom, 1, 0.0)
            put(top, 0, d)
            put(top, 1, 0.0)
        elif self.kind == "confined_compression":
            put(bottom, 1, 0.0)
            put(top, 1, -d)
            put(left, 0, 0.0)
            put(right, 0, 0.0)
        elif self.kind == "random":
            # outward-normal displacement along each edge; tangential motion free
            c = self.coefficients
            put(bottom, 1, -edge_profile(c["bottom"], X[bottom]))
            put(top, 1, edge_profile(c["top"], X[top]))
            put(left, 0, -edge_profile(c["left"], Y[left]))
            put(right, 0, edge_profile(c["right"], Y[right]))
        else:  # pragma: no cover - guarded in make_boundary_condition
            raise ValidationError(f"unknown boundary condition {self.kind!r}")

        dofs = np.array(sorted(fixed), dtype=np.int64)
        values = np.array([fixed[k] for k in dofs], dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValidationError("prescribed displacements must be finite")
        return dofs, values


def draw_random_coefficients(seed):
    """Independent coefficient sets for the four edges, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in RANDOM_RANGES])
    hi = np.array([r[1] for r in RANDOM_RANGES])
    return {edge: lo + (hi - lo) * rng.random(len(RANDOM_RANGES)) for edge in EDGES}


def make_boundary_condition(kind, magnitude=DEFAULT_DELTA, seed=None, dx=None, dy=None, matrix=None, grips="roller"):
    """Build a validated :class:`BoundaryCondition`.

    Standard kinds take ``magnitude`` (nominal stretch ``delta``); ``biaxial``
    takes ``dx, dy``; ``random`` takes ``seed``; ``affine`` takes a 2x2
    ``matrix`` A and prescribes ``u = (A - I) X`` on the whole boundary.
    Uniaxial kinds pull the gripped edges on ``"roller"`` supports (lateral
    motion free) or ``"clamped"`` ones (lateral motion fixed).
    """
    if kind not in BC_KINDS:
        raise ValidationError(f"unknown boundary condition {kind!r}; expected one of {BC_KINDS}")
    if kind in STANDARD_KINDS:
        if not (np.isfinite(magnitude) and magnitude > 0):
            raise ValidationError("magnitude must be positive and finite")
        if grips not in GRIPS:
            raise ValidationError(f"grips must be one of {GRIPS}")
        return BoundaryCondition(kind, magnitude=float(magnitude), grips=grips if kind in UNIAXIAL_KINDS else "roller")
    if kind == "biaxial":
        if dx is None or dy is None or not (np.isfinite(dx) and np.isfinite(dy)):
            raise ValidationError("biaxial needs finite dx and dy")
        return BoundaryCondition(kind, magnitude=0.0, dx=float(dx), dy=float(dy))
    if kind == "affine":
        A = np.asarray(matrix, dtype=float)
        if A.shape != (2, 2) or not np.all(np.isfinite(A)) or np.linalg.det(A) <= 0:
            raise ValidationError("affine needs a finite 2x2 matrix with positive determinant")
        return BoundaryCondition(kind, magnitude=0.0, matrix=tuple(map(tuple, A)))
    if seed is None:
        raise ValidationError("random boundary conditions require a seed")
    return BoundaryCondition(kind, magnitude=0.0, seed=int(seed), coefficients=draw_random_coefficients(seed))


_BC_KEYS = {"kind", "magnitude", "seed", "dx", "dy", "matrix", "grips", "coefficients"}


def boundary_from_dict(data):
    """Inverse of :meth:`BoundaryCondition.to_dict`; random coefficients are
    redrawn from the seed and checked against any stored copy."""
    data = dict(data)
    unknown = set(data) - _BC_KEYS
    if unknown:
        raise ValidationError(f"unknown boundary-condition keys {sorted(unknown)}")
    if "kind" not in data:
        raise ValidationError("boundary condition needs a 'kind'")
    stored = data.pop("coefficients", None)
    kwargs = {k: data[k] for k in ("magnitude", "seed", "dx", "dy", "matrix", "grips") if data.get(k) is not None}
    bc = make_boundary_condition(data["kind"], **kwargs)
    if stored is not None and bc.kind == "random":
        for edge in EDGES:
            if not np.allclose(np.asarray(stored[edge], dtype=float), bc.coefficients[edge], rtol=0, atol=0):
                raise ValidationError(f"stored coefficients for edge {edge!r} do not match seed {bc.seed}")
    return bc
