from functools import lru_cache

import numpy as np
import pytest

from kinecluster.forward_sim import PatternSpec, build_domain, make_boundary_condition, solve_forward
from kinecluster.forward_sim.domain import grid_points
from kinecluster.kinematics import compute_kinematics, interpolate_to_grid
from kinecluster.forward_sim import sample_markers


@lru_cache(maxsize=None)
def coarse_case(pattern="circle", bc="equibiaxial", resolution=24, grid=41, markers=800, seed=7):
    """A cheap solve + gridded kinematics shared across test modules."""
    spec = getattr(PatternSpec, pattern)()
    domain = build_domain(spec, resolution)
    field = solve_forward(domain, make_boundary_condition(bc))
    ms = sample_markers(field, markers, seed)
    g = compute_kinematics(interpolate_to_grid(ms, R=grid))
    truth = domain.ground_truth(grid_points(grid))
    return domain, field, ms, g, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
