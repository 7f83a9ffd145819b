"""Ground-truth generation: patterns, hyperelastic solves and marker sampling."""

from .boundary import (
    BC_KINDS,
    STANDARD_KINDS,
    BoundaryCondition,
    boundary_from_dict,
    draw_random_coefficients,
    edge_profile,
    make_boundary_condition,
)
from .domain import DEFAULT_MATERIALS, MaterialDomain, build_domain, grid_points
from .markers import sample_markers
from .materials import (
    HolzapfelOgdenEnergy,
    HolzapfelOgdenParams,
    holzapfel_ogden_isochoric_energy,
    isochoric_cauchy_green,
    lame_parameters,
    neo_hookean_energy,
    neo_hookean_stress,
    neo_hookean_tangent,
)
from .patterns import PatternSpec
from .solver import DisplacementField, solve_forward, total_energy

__all__ = [
    "BC_KINDS",
    "STANDARD_KINDS",
    "boundary_from_dict",
    "BoundaryCondition",
    "DEFAULT_MATERIALS",
    "DisplacementField",
    "HolzapfelOgdenEnergy",
    "HolzapfelOgdenParams",
    "MaterialDomain",
    "PatternSpec",
    "build_domain",
    "draw_random_coefficients",
    "edge_profile",
    "grid_points",
    "holzapfel_ogden_isochoric_energy",
    "isochoric_cauchy_green",
    "lame_parameters",
    "make_boundary_condition",
    "neo_hookean_energy",
    "neo_hookean_stress",
    "neo_hookean_tangent",
    "sample_markers",
    "solve_forward",
    "total_energy",
]
