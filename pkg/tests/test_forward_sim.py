import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from kinecluster.errors import InvertedStateError, PatternError, SolverError, ValidationError
from kinecluster.forward_sim import (
    PatternSpec,
    boundary_from_dict,
    build_domain,
    make_boundary_condition,
    sample_markers,
    solve_forward,
)
from kinecluster.forward_sim.boundary import RANDOM_RANGES, draw_random_coefficients
from kinecluster.forward_sim.materials import (
    HolzapfelOgdenParams,
    holzapfel_ogden_isochoric_energy,
    lame_parameters,
    neo_hookean_energy,
    neo_hookean_stress,
    neo_hookean_tangent,
)
from kinecluster.forward_sim.solver import deformation_gradients, internal_force, total_energy

HOMOGENEOUS = ((1.0, 0.3), (1.0, 0.3))


def element_components(domain):
    """Flood fill over inclusion elements that share an edge."""
    owner = {}
    for e, tri in enumerate(domain.elements):
        if domain.phase[e] != 1:
            continue
        for a, b in ((0, 1), (1, 2), (2, 0)):
            owner.setdefault(tuple(sorted((tri[a], tri[b]))), []).append(e)
    adj = {e: set() for e in np.flatnonzero(domain.phase == 1)}
    for elems in owner.values():
        for e in elems:
            adj[e].update(x for x in elems if x != e)
    seen, count = set(), 0
    for start in adj:
        if start in seen:
            continue
        count += 1
        stack = [start]
        while stack:
            e = stack.pop()
            if e in seen:
                continue
            seen.add(e)
            stack.extend(adj[e] - seen)
    return count


# -- patterns and domains -------------------------------------------------------


def test_circle_area_fraction_within_one_element_band():
    domain = build_domain(PatternSpec.circle(), 64)
    frac = domain.areas[domain.phase == 1].sum()
    band = 2 * math.pi * 0.2 / 64
    assert abs(frac - math.pi * 0.04) <= band


def test_tiny_circle_leaves_every_element_background():
    domain = build_domain(PatternSpec.circle(radius=1e-4), 16)
    assert not domain.phase.any()


def test_four_circles_give_four_element_components():
    domain = build_domain(PatternSpec.four_circles(), 64)
    assert element_components(domain) == 4


def test_mesh_is_conforming_and_covers_the_square():
    domain = build_domain(PatternSpec.ring(), 16)
    assert domain.n_nodes == 17 * 17
    assert domain.n_elements == 2 * 16 * 16
    assert np.isclose(domain.areas.sum(), 1.0)
    assert np.all(domain.areas > 0)
    # every interior edge is shared by exactly two triangles
    edges = {}
    for tri in domain.elements:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = tuple(sorted((tri[a], tri[b])))
            edges[key] = edges.get(key, 0) + 1
    assert set(edges.values()) <= {1, 2}
    assert sum(v == 1 for v in edges.values()) == 4 * 16


@pytest.mark.parametrize(
    "make",
    [
        lambda: PatternSpec.circle(radius=0.0),
        lambda: PatternSpec.circle(center=(0.1, 0.5), radius=0.2),
        lambda: PatternSpec.ring(inner=0.3, outer=0.2),
        lambda: PatternSpec.split(1.5),
        lambda: PatternSpec("hexagon"),
    ],
)
def test_invalid_patterns_are_rejected(make):
    with pytest.raises(PatternError):
        make()


def test_pattern_dicts_fill_defaults_and_round_trip():
    for kind in ("circle", "ring", "cross", "four_circles", "split"):
        spec = PatternSpec.from_dict({"kind": kind})
        assert spec == getattr(PatternSpec, kind)()
        assert PatternSpec.from_dict(spec.to_dict()) == spec
    assert PatternSpec.from_dict({"kind": "circle", "radius": 0.1}).params["radius"] == 0.1
    for bad in ({"kind": "circle", "colour": 1}, {"kind": "blob"}, {}):
        with pytest.raises(PatternError):
            PatternSpec.from_dict(bad)


def test_raster_pattern_round_trip(tmp_path):
    img = np.zeros((32, 32), dtype=np.uint8)
    img[:16, :] = 255  # top half is inclusion
    path = tmp_path / "mask.pgm"
    Image.fromarray(img).save(path)
    spec = PatternSpec.raster(path)
    assert spec.contains([[0.5, 0.9]])[0] and not spec.contains([[0.5, 0.1]])[0]
    domain = build_domain(spec, 16)
    assert np.isclose(domain.areas[domain.phase == 1].sum(), 0.5)


def test_raster_errors(tmp_path):
    flat = tmp_path / "flat.png"
    Image.fromarray(np.full((8, 8), 40, dtype=np.uint8)).save(flat)
    with pytest.raises(PatternError):
        PatternSpec.raster(flat)
    with pytest.raises(PatternError):
        PatternSpec.raster(tmp_path / "missing.png")


def test_ground_truth_is_mesh_objective_away_from_interfaces(rng):
    pts = rng.random((4000, 2))
    spec = PatternSpec.circle()
    dist = np.abs(np.hypot(pts[:, 0] - 0.5, pts[:, 1] - 0.5) - 0.2)
    for res in (16, 32, 64):
        phase = build_domain(spec, res).phase_at(pts)
        far = dist > math.sqrt(2) / res
        assert np.array_equal(phase[far], spec.labels(pts)[far])


def test_materials_positive_lame():
    mu, lam = lame_parameters(1.0, 0.3)
    assert mu == pytest.approx(1 / 2.6) and lam == pytest.approx(0.3 / (1.3 * 0.4))
    with pytest.raises(ValidationError):
        lame_parameters(1.0, 0.5)
    with pytest.raises(ValidationError):
        lame_parameters(-1.0, 0.3)


# -- neo-Hookean ------------------------------------------------------------------


def test_neo_hookean_reference_state():
    assert neo_hookean_energy(np.eye(2), 0.7, 2.1) == 0.0


def test_neo_hookean_equibiaxial_value():
    mu, lam = lame_parameters(1.0, 0.3)
    # frozen from a scalar evaluation with the math module
    assert neo_hookean_energy(np.diag([1.2, 1.2]), mu, lam) == pytest.approx(0.06733859101054013, rel=1e-14)


def _random_F(rng):
    while True:
        F = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
        if np.linalg.det(F) > 0.2:
            return F


def test_neo_hookean_stress_matches_finite_differences(rng):
    mu, lam = 0.38, 0.58
    for _ in range(10):
        F = _random_F(rng)
        P = neo_hookean_stress(F, mu, lam)
        fd = np.zeros((2, 2))
        h = 1e-6
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2))
                e[i, j] = h
                fd[i, j] = (neo_hookean_energy(F + e, mu, lam) - neo_hookean_energy(F - e, mu, lam)) / (2 * h)
        assert np.linalg.norm(P - fd) <= 1e-6 * np.linalg.norm(fd)


def test_neo_hookean_tangent_matches_finite_differences(rng):
    mu, lam = 0.38, 0.58
    F = _random_F(rng)
    A = neo_hookean_tangent(F, mu, lam)
    h = 1e-6
    for k in range(2):
        for m in range(2):
            e = np.zeros((2, 2))
            e[k, m] = h
            fd = (neo_hookean_stress(F + e, mu, lam) - neo_hookean_stress(F - e, mu, lam)) / (2 * h)
            assert np.allclose(A[:, :, k, m], fd, atol=1e-7)


def test_inverted_state_raises():
    with pytest.raises(InvertedStateError):
        neo_hookean_energy(np.diag([1.0, -1.0]), 1.0, 1.0)
    with pytest.raises(InvertedStateError):
        neo_hookean_stress(np.zeros((2, 2)), 1.0, 1.0)


# -- Holzapfel-Ogden ---------------------------------------------------------------

HO = HolzapfelOgdenParams(a=0.059, b=8.023, a_f=18.472, b_f=16.026, a_s=2.481, b_s=11.12, a_fs=0.216, b_fs=11.436)
F0, S0 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])


def test_holzapfel_ogden_reference_state():
    w = holzapfel_ogden_isochoric_energy(np.eye(3), F0, S0, HO)
    assert (w.I1, w.I4f, w.I4s, w.I8fs) == (3.0, 1.0, 1.0, 0.0)
    assert (w.W_g, w.W_f, w.W_s, w.W_fs, w.total) == (0.0, 0.0, 0.0, 0.0, 0.0)


@st.composite
def unimodular_spd(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(r.standard_normal((3, 3)))
    lam = np.exp(r.uniform(-0.3, 0.3, 3))
    lam /= np.prod(lam) ** (1 / 3)
    return (Q * lam) @ Q.T, Q, lam


@settings(max_examples=60, deadline=None)
@given(unimodular_spd())
def test_holzapfel_ogden_matches_spectral_oracle(case):
    C, Q, lam = case
    C = 0.5 * (C + C.T)
    w = holzapfel_ogden_isochoric_energy(C, F0, S0, HO)
    # invariants from the eigen-decomposition instead of contractions
    pf, ps = Q.T @ F0, Q.T @ S0
    I1, I4f, I4s, I8 = lam.sum(), (lam * pf**2).sum(), (lam * ps**2).sum(), (lam * pf * ps).sum()
    assert w.I1 == pytest.approx(I1, abs=1e-12)
    p = HO
    ref = (
        p.a / (2 * p.b) * (math.exp(p.b * (I1 - 3)) - 1)
        + p.a_f / (2 * p.b_f) * (math.exp(p.b_f * (I4f - 1) ** 2) - 1)
        + p.a_s / (2 * p.b_s) * (math.exp(p.b_s * (I4s - 1) ** 2) - 1)
        + p.a_fs / (2 * p.b_fs) * (math.exp(p.b_fs * I8**2) - 1)
    )
    assert w.total == pytest.approx(ref, rel=1e-9, abs=1e-13)


def test_holzapfel_ogden_zero_fibre_stiffness():
    params = HolzapfelOgdenParams(1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    C = np.diag([1.5, 1 / 1.5, 1.0])
    assert holzapfel_ogden_isochoric_energy(C, F0, S0, params).W_f == 0.0


def test_holzapfel_ogden_input_checks():
    with pytest.raises(ValidationError):
        holzapfel_ogden_isochoric_energy(np.eye(3), np.array([1.0, 1.0, 0.0]), S0, HO)
    with pytest.raises(ValidationError):
        holzapfel_ogden_isochoric_energy(2 * np.eye(3), F0, S0, HO)


# -- boundary conditions --------------------------------------------------------------


def _prescribed(bc, nodes):
    dofs, vals = bc.constraints(nodes)
    return dict(zip(dofs.tolist(), vals.tolist()))


def test_equibiaxial_edge_values():
    nodes = np.array([[1.0, 0.5], [0.5, 1.0], [0.0, 0.0]])
    got = _prescribed(make_boundary_condition("equibiaxial", 0.3), nodes)
    assert got[0] == pytest.approx(0.15) and got[1] == pytest.approx(0.0)
    assert got[2] == pytest.approx(0.0) and got[3] == pytest.approx(0.15)
    assert got[4] == pytest.approx(-0.15) and got[5] == pytest.approx(-0.15)


def test_uniaxial_rollers_leave_lateral_motion_free():
    domain = build_domain(PatternSpec.circle(), 16)
    got = _prescribed(make_boundary_condition("uniaxial_x", 0.3), domain.nodes)
    X = domain.nodes
    left = np.flatnonzero(X[:, 0] == 0)
    assert all(got[2 * n] == -0.15 for n in left)
    # only the grip midpoints are pinned laterally
    assert sum((2 * n + 1) in got for n in left) == 1
    clamped = _prescribed(make_boundary_condition("uniaxial_x", 0.3, grips="clamped"), domain.nodes)
    assert all((2 * n + 1) in clamped for n in left)


def test_random_bc_is_deterministic():
    a, b = make_boundary_condition("random", seed=11), make_boundary_condition("random", seed=11)
    for edge in a.coefficients:
        assert np.array_equal(a.coefficients[edge], b.coefficients[edge])


def test_random_coefficients_stay_in_range():
    lo = np.array([r[0] for r in RANDOM_RANGES])
    hi = np.array([r[1] for r in RANDOM_RANGES])
    for seed in range(1000):
        for coeffs in draw_random_coefficients(seed).values():
            assert np.all(coeffs >= lo) and np.all(coeffs <= hi)


def test_boundary_validation():
    with pytest.raises(ValidationError):
        make_boundary_condition("random")
    with pytest.raises(ValidationError):
        make_boundary_condition("equibiaxial", magnitude=0.0)
    with pytest.raises(ValidationError):
        make_boundary_condition("twist")
    with pytest.raises(ValidationError):
        make_boundary_condition("uniaxial_x", grips="glue")


def test_boundary_dict_round_trip_and_tamper_check():
    for bc in (
        make_boundary_condition("shear", 0.2),
        make_boundary_condition("uniaxial_y", grips="clamped"),
        make_boundary_condition("biaxial", dx=0.3, dy=0.1),
        make_boundary_condition("random", seed=4),
    ):
        again = boundary_from_dict(bc.to_dict())
        assert again.name == bc.name and again.to_dict() == bc.to_dict()
    data = make_boundary_condition("random", seed=4).to_dict()
    data["coefficients"]["top"][0] += 0.01
    with pytest.raises(ValidationError):
        boundary_from_dict(data)
    with pytest.raises(ValidationError):
        boundary_from_dict({"kind": "shear", "colour": "red"})


# -- solver -----------------------------------------------------------------------------


def test_zero_boundary_gives_zero_field():
    domain = build_domain(PatternSpec.circle(), 8)
    field = solve_forward(domain, make_boundary_condition("biaxial", dx=0.0, dy=0.0))
    assert np.all(field.u == 0.0)


def test_patch_test_homogeneous_affine():
    A = np.array([[1.15, 0.08], [-0.04, 0.92]])
    domain = build_domain(PatternSpec.circle(), 12, materials=HOMOGENEOUS)
    field = solve_forward(domain, make_boundary_condition("affine", matrix=A))
    assert np.max(np.abs(deformation_gradients(domain, field.u) - A)) <= 1e-8


def test_residual_matches_energy_finite_differences(rng):
    domain = build_domain(PatternSpec.circle(), 8)
    for _ in range(10):
        u = 0.01 * rng.standard_normal(2 * domain.n_nodes)
        r = internal_force(domain, u)
        h = 1e-6
        fd = np.array(
            [
                (total_energy(domain, u + h * e) - total_energy(domain, u - h * e)) / (2 * h)
                for e in np.eye(len(u))
            ]
        )
        assert np.linalg.norm(r - fd) <= 1e-6 * np.linalg.norm(fd)


def test_newton_solution_is_an_energy_minimum(rng):
    domain = build_domain(PatternSpec.circle(), 8)
    bc = make_boundary_condition("equibiaxial", 0.3)
    field = solve_forward(domain, bc)
    fixed, _ = bc.constraints(domain.nodes)
    free = np.setdiff1d(np.arange(2 * domain.n_nodes), fixed)
    u0 = field.u.ravel()
    e0 = total_energy(domain, u0)
    for _ in range(100):
        du = np.zeros_like(u0)
        du[free] = 1e-3 * rng.standard_normal(len(free))
        assert total_energy(domain, u0 + du) >= e0


@pytest.mark.parametrize("kind", ["equibiaxial", "uniaxial_x", "shear", "confined_compression"])
def test_solver_diagnostics_and_monotone_energy(kind):
    domain = build_domain(PatternSpec.circle(), 16)
    field = solve_forward(domain, make_boundary_condition(kind))
    d = field.diagnostics
    assert d["relative_residual"] <= 1e-8
    assert d["min_jacobian"] > 0
    for step in d["steps"]:
        e = np.array(step["energies"])
        assert np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[:-1])))


def test_solve_is_bitwise_deterministic():
    domain = build_domain(PatternSpec.cross(), 12)
    bc = make_boundary_condition("random", seed=3)
    assert np.array_equal(solve_forward(domain, bc).u, solve_forward(domain, bc).u)


def test_solver_reports_failure_with_diagnostics():
    domain = build_domain(PatternSpec.circle(), 8)
    with pytest.raises(SolverError) as info:
        solve_forward(domain, make_boundary_condition("confined_compression", 1.2), steps=1, max_steps=2)
    assert info.value.exit_code == 3


# -- markers -----------------------------------------------------------------------------


def test_markers_count_bounds_and_determinism():
    domain = build_domain(PatternSpec.circle(), 8)
    field = solve_forward(domain, make_boundary_condition("equibiaxial"))
    m = sample_markers(field, 1000, seed=7)
    assert len(m) == 1000
    assert m.positions.min() >= 0 and m.positions.max() <= 1
    again = sample_markers(field, 1000, seed=7)
    assert np.array_equal(m.positions, again.positions) and np.array_equal(m.displacements, again.displacements)


def test_markers_of_zero_field_are_zero():
    domain = build_domain(PatternSpec.circle(), 8)
    field = solve_forward(domain, make_boundary_condition("biaxial", dx=0.0, dy=0.0))
    assert np.all(sample_markers(field, 50, 1).displacements == 0)


def test_centroid_interpolation_is_nodal_mean(rng):
    domain = build_domain(PatternSpec.circle(), 8)
    field = solve_forward(domain, make_boundary_condition("shear", 0.1))
    elems = rng.choice(domain.n_elements, 30, replace=False)
    centroids = domain.nodes[domain.elements[elems]].mean(axis=1)
    expected = field.u[domain.elements[elems]].mean(axis=1)
    assert np.allclose(field.interpolate(centroids), expected, atol=1e-14)


def test_too_few_markers():
    domain = build_domain(PatternSpec.circle(), 8)
    field = solve_forward(domain, make_boundary_condition("equibiaxial"))
    with pytest.raises(ValidationError):
        sample_markers(field, 3)
