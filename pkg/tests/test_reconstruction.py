import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coarse_case
from kinecluster.errors import ClusteringError, ValidationError
from kinecluster.kinematics import assemble_features
from kinecluster.reconstruction import cluster_medoids, reconstruct_field, reconstruction_mse, sensor_sweep


def brute_medoid(X):
    totals = [sum(np.linalg.norm(a - b) for b in X) for a in X]
    return int(np.argmin(totals))


def test_singleton_cluster_is_its_own_medoid():
    assert cluster_medoids(np.array([[3.0], [1.0], [2.0]]), np.array([0, 1, 0]))[1] == 1


def test_collinear_medoid():
    assert cluster_medoids(np.array([[0.0], [1.0], [10.0]]), np.zeros(3, dtype=int))[0] == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40))
def test_medoid_matches_enumeration_and_ignores_order(seed, n):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, 3))
    m = cluster_medoids(X, np.zeros(n, dtype=int))[0]
    assert m == brute_medoid(X)
    if n < 3:  # two points always tie
        return
    perm = r.permutation(n)
    assert perm[cluster_medoids(X[perm], np.zeros(n, dtype=int))[0]] == m


def test_medoids_need_full_labeling():
    with pytest.raises(ValidationError):
        cluster_medoids(np.zeros((3, 1)), np.array([0, -1, 0]))
    with pytest.raises(ClusteringError):
        cluster_medoids(np.zeros((3, 1)), np.array([0, 2, 0]))


def test_identity_and_constant_reconstructions(rng):
    v = rng.random((30, 2))
    ident = np.arange(30)
    assert np.array_equal(reconstruct_field(v, ident, cluster_medoids(v, ident)), v)
    zeros = np.zeros(30, dtype=int)
    m = cluster_medoids(v, zeros)
    assert np.all(reconstruct_field(v, zeros, m) == v[m[0]])


def test_piecewise_constant_field_is_exact(rng):
    labels = rng.integers(0, 5, 100)
    labels[:5] = np.arange(5)
    v = rng.random((5, 3))[labels]
    rec = reconstruct_field(v, labels, cluster_medoids(v, labels))
    assert reconstruction_mse(v, rec) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_reconstruction_is_idempotent_and_piecewise(seed, k):
    r = np.random.default_rng(seed)
    labels = np.concatenate([np.arange(k), r.integers(0, k, 60)])
    v = r.standard_normal((len(labels), 2))
    m = cluster_medoids(v, labels)
    once = reconstruct_field(v, labels, m)
    assert np.array_equal(reconstruct_field(once, labels, m), once)
    for c in range(2):
        assert len(np.unique(once[:, c])) <= k


def test_inconsistent_medoids_rejected():
    with pytest.raises(ValidationError):
        reconstruct_field(np.zeros(4), np.array([0, 0, 1, 1]), np.array([2, 3]))


def test_mse_closed_forms(rng):
    v = rng.random(50)
    assert reconstruction_mse(v, v) == 0.0
    assert reconstruction_mse(v, v + 0.3) == pytest.approx(0.09, rel=1e-12)
    with pytest.raises(ValidationError):
        reconstruction_mse(v, v[:10])


def strain_features(bc):
    *_, g, _ = coarse_case(bc=bc)
    return assemble_features(g, "green_lagrange", standardize=False)


def test_sweep_ends_at_zero_and_decreases():
    fm = strain_features("uniaxial_y")
    reports = sensor_sweep([fm], [2, 8, 32, fm.n], seed=0)
    assert reports[-1].mse == 0.0 and reports[-1].n_sensors == fm.n
    assert reports[2].mse < reports[0].mse
    assert all(r.mse >= 0 for r in reports)
    for r in reports:
        assert len(np.unique(r.reconstructed[:, 0])) <= r.n_sensors


def test_sweep_ensemble_mode_and_determinism():
    sets = [strain_features("uniaxial_y"), strain_features("equibiaxial")]
    a = sensor_sweep(sets, [2, 4], eval_case=0, seed=1, components=("E11", "E22", "E12"))
    b = sensor_sweep(sets, [2, 4], eval_case=0, seed=1, components=("E11", "E22", "E12"))
    assert [r.mode for r in a] == ["ensemble", "ensemble"]
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert a[0].mse == pytest.approx(np.mean(list(a[0].mse_components.values())))


def test_constant_sweep_point():
    fm = strain_features("uniaxial_y")
    (r,) = sensor_sweep([fm], [1])
    assert r.n_sensors == 1 and np.ptp(r.reconstructed) == 0


def test_sweep_validation():
    fm = strain_features("uniaxial_y")
    with pytest.raises(ValidationError):
        sensor_sweep([fm], [4, 2])
    with pytest.raises(ValidationError):
        sensor_sweep([fm], [2], components=("E33",))
    *_, g, _ = coarse_case(bc="uniaxial_y")
    with pytest.raises(ValidationError):
        sensor_sweep([assemble_features(g, "invariants")], [2])


def test_standardized_features_are_unscaled_for_errors():
    *_, g, _ = coarse_case(bc="uniaxial_y")
    raw = assemble_features(g, "green_lagrange", standardize=False)
    std = assemble_features(g, "green_lagrange", standardize=True)
    n = raw.n
    assert sensor_sweep([std], [n])[0].mse == 0.0
    (r,) = sensor_sweep([std], [1])
    assert np.allclose(r.reconstructed[:, 0], raw.values[r.medoids[0], 1])

