"""Scattered displacement markers sampled from a forward solution."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..kinematics import MarkerSet
from .solver import DisplacementField


def sample_markers(field: DisplacementField, n=1000, seed=0):
    """Draw ``n`` uniform reference positions and interpolate their displacements."""
    if n < 4:
        raise ValidationError("need at least 4 markers")
    rng = np.random.default_rng(seed)
    positions = rng.random((int(n), 2))
    return MarkerSet(positions, field.interpolate(positions), source="simulated")
