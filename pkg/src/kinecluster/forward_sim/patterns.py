"""Two-phase heterogeneity patterns on the unit square.

Every pattern answers one question: is a point inside the inclusion phase?
Phase 0 is the background, phase 1 the inclusion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import PatternError

PATTERN_KINDS = ("circle", "ring", "cross", "four_circles", "split", "raster")

FOUR_CIRCLE_CENTERS = ((0.25, 0.25), (0.75, 0.75), (0.33, 0.67), (0.67, 0.33))


@dataclass(frozen=True)
class PatternSpec:
    """Geometry of the inclusion phase.

    ``params`` holds kind-specific geometry:

    * circle: ``center``, ``radius``
    * ring: ``center``, ``inner``, ``outer``
    * cross: ``center``, ``half_length``, ``half_width``
    * four_circles: ``centers``, ``radius``
    * split: ``position`` (inclusion is ``y >= position``)
    * raster: ``path`` (8-bit grayscale PGM/PNG, ``>= 128`` is inclusion)
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise PatternError(f"unknown pattern kind {self.kind!r}")
        check = getattr(self, f"_check_{self.kind}")
        check()
        if self.kind == "raster":
            object.__setattr__(self, "_mask", load_raster_mask(self.params["path"]))

    @classmethod
    def circle(cls, center=(0.5, 0.5), radius=0.2):
        return cls("circle", {"center": tuple(center), "radius": float(radius)})

    @classmethod
    def ring(cls, center=(0.5, 0.5), inner=0.15, outer=0.35):
        return cls("ring", {"center": tuple(center), "inner": float(inner), "outer": float(outer)})

    @classmethod
    def cross(cls, center=(0.5, 0.5), half_length=0.25, half_width=0.10):
        return cls(
            "cross",
            {"center": tuple(center), "half_length": float(half_length), "half_width": float(half_width)},
        )

    @classmethod
    def four_circles(cls, centers=FOUR_CIRCLE_CENTERS, radius=0.125):
        return cls("four_circles", {"centers": tuple(tuple(c) for c in centers), "radius": float(radius)})

    @classmethod
    def split(cls, position=0.5):
        return cls("split", {"position": float(position)})

    @classmethod
    def raster(cls, path):
        return cls("raster", {"path": str(path)})

    @classmethod
    def from_dict(cls, data):
        """Build from a ``{"kind": ..., **params}`` mapping; omitted geometry takes the defaults."""
        data = dict(data)
        kind = data.pop("kind", None)
        if kind not in PATTERN_KINDS:
            raise PatternError(f"unknown pattern kind {kind!r}")
        try:
            return getattr(cls, kind)(**data)
        except TypeError as exc:
            raise PatternError(f"bad {kind} parameters {sorted(data)}: {exc}") from None

    def to_dict(self):
        out = {"kind": self.kind}
        for key, value in self.params.items():
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[key] = value
        return out

    # -- validation -------------------------------------------------------

    def _require(self, *names):
        missing = [n for n in names if n not in self.params]
        if missing:
            raise PatternError(f"{self.kind} pattern is missing {missing}")

    @staticmethod
    def _disc_inside(center, radius):
        cx, cy = center
        if radius <= 0:
            raise PatternError("radii must be positive")
        if cx - radius < 0 or cx + radius > 1 or cy - radius < 0 or cy + radius > 1:
            raise PatternError(f"disc at {center} with radius {radius} leaves the unit square")

    def _check_circle(self):
        self._require("center", "radius")
        self._disc_inside(self.params["center"], self.params["radius"])

    def _check_ring(self):
        self._require("center", "inner", "outer")
        if not 0 < self.params["inner"] < self.params["outer"]:
            raise PatternError("ring needs 0 < inner < outer")
        self._disc_inside(self.params["center"], self.params["outer"])

    def _check_cross(self):
        self._require("center", "half_length", "half_width")
        (cx, cy), a, b = self.params["center"], self.params["half_length"], self.params["half_width"]
        if not (0 < b <= a):
            raise PatternError("cross needs 0 < half_width <= half_length")
        if cx - a < 0 or cx + a > 1 or cy - a < 0 or cy + a > 1:
            raise PatternError("cross leaves the unit square")

    def _check_four_circles(self):
        self._require("centers", "radius")
        for c in self.params["centers"]:
            self._disc_inside(c, self.params["radius"])

    def _check_split(self):
        self._require("position")
        if not 0 < self.params["position"] < 1:
            raise PatternError("split position must lie in (0, 1)")

    def _check_raster(self):
        self._require("path")

    # -- geometry ---------------------------------------------------------

    def contains(self, points):
        """Boolean inclusion membership for an ``(n, 2)`` array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        p = self.params
        if self.kind == "circle":
            cx, cy = p["center"]
            return (x - cx) ** 2 + (y - cy) ** 2 <= p["radius"] ** 2
        if self.kind == "ring":
            cx, cy = p["center"]
            r2 = (x - cx) ** 2 + (y - cy) ** 2
            return (r2 >= p["inner"] ** 2) & (r2 <= p["outer"] ** 2)
        if self.kind == "cross":
            cx, cy = p["center"]
            dx, dy = np.abs(x - cx), np.abs(y - cy)
            a, b = p["half_length"], p["half_width"]
            return ((dx <= a) & (dy <= b)) | ((dx <= b) & (dy <= a))
        if self.kind == "four_circles":
            inside = np.zeros(len(pts), dtype=bool)
            r2 = p["radius"] ** 2
            for cx, cy in p["centers"]:
                inside |= (x - cx) ** 2 + (y - cy) ** 2 <= r2
            return inside
        if self.kind == "split":
            return y >= p["position"]
        mask = self._mask
        h, w = mask.shape
        col = np.clip(np.floor(x * w).astype(int), 0, w - 1)
        row = np.clip(np.floor((1.0 - y) * h).astype(int), 0, h - 1)
        return mask[row, col]

    def labels(self, points):
        return self.contains(points).astype(np.int64)


def load_raster_mask(path, threshold=128):
    """Read a grayscale PGM/PNG and threshold it into a boolean inclusion mask.

    Row 0 of the image is the top edge (y = 1) of the domain.
    """
    from PIL import Image, UnidentifiedImageError

    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "1", "I;16", "I"):
                img = img.convert("L")
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise PatternError(f"cannot read raster pattern {path}: {exc}") from exc
    mask = arr >= threshold
    if mask.all() or not mask.any():
        raise PatternError(f"raster {path} is not two-phase after thresholding at {threshold}")
    return mask
