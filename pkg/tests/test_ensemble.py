from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coarse_case
from kinecluster.clustering import Labeling, adjusted_rand_index, kmeans
from kinecluster.ensemble import (
    SimilarityOperator,
    build_hypergraph,
    component_ground_truth,
    connected_components,
    cspa,
    eigengap_k,
    enforce_min_size,
    ensemble_pipeline,
    segment,
)
from kinecluster.errors import ClusteringError, ValidationError
from kinecluster.forward_sim import PatternSpec
from kinecluster.forward_sim.domain import grid_points
from kinecluster.kinematics import FeatureMatrix, assemble_features

# the worked example printed in the consensus-clustering reference table (0 = unassigned)
TABLE_LABELS = [
    [1, 1, 1, 2, 2, 3, 3],
    [2, 2, 2, 3, 3, 1, 1],
    [1, 1, 2, 2, 3, 3, 3],
    [1, 2, 0, 1, 2, 0, 0],
]
TABLE_H = np.array(
    [
        [1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0],
        [1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1],
        [1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0],
        [0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 1],
        [0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0],
    ]
)


def flood_components(image, connectivity=4):
    """Plain BFS labelling used as an oracle."""
    steps = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    out = -np.ones(image.shape, dtype=int)
    count = 0
    for start in zip(*np.nonzero(out < 0)):
        if out[start] >= 0:
            continue
        out[start] = count
        q = deque([start])
        while q:
            i, j = q.popleft()
            for di, dj in steps:
                a, b = i + di, j + dj
                if 0 <= a < image.shape[0] and 0 <= b < image.shape[1] and out[a, b] < 0 and image[a, b] == image[i, j]:
                    out[a, b] = count
                    q.append((a, b))
        count += 1
    return out, count


def grid_labeling(image):
    image = np.asarray(image)
    return Labeling(image.ravel(), grid_shape=image.shape)


random_images = st.tuples(st.integers(3, 14), st.integers(3, 14), st.integers(1, 4), st.integers(0, 2**31 - 1)).map(
    lambda t: np.random.default_rng(t[3]).integers(0, t[2], (t[0], t[1]))
)


# -- connected components ------------------------------------------------------------


def test_uniform_image_is_one_component():
    assert connected_components(grid_labeling(np.zeros((6, 5), dtype=int))).k == 1


def test_checkerboard_splits_into_cells():
    board = np.indices((5, 6)).sum(axis=0) % 2
    assert connected_components(grid_labeling(board)).k == 30
    assert connected_components(grid_labeling(board), connectivity=8).k == 2


@pytest.mark.parametrize("pattern, expected", [("circle", 2), ("four_circles", 5), ("ring", 3), ("cross", 2)])
def test_truth_images_component_counts(pattern, expected):
    truth = getattr(PatternSpec, pattern)().labels(grid_points(89))
    assert len(np.unique(component_ground_truth(truth, (89, 89)))) == expected
    _, count = flood_components(truth.reshape(89, 89))
    assert count == expected


def test_circle_kmeans_image_has_two_segments():
    *_, g, _ = coarse_case()
    lab = kmeans(assemble_features(g, "invariants"), 2, seed=3)
    assert segment(lab).k == 2


@settings(max_examples=100, deadline=None)
@given(random_images, st.sampled_from([4, 8]))
def test_components_match_flood_fill(image, connectivity):
    seg = connected_components(grid_labeling(image), connectivity)
    oracle, count = flood_components(image, connectivity)
    assert seg.k == count
    assert adjusted_rand_index(seg, oracle.ravel()) == 1.0
    # dense ids in first-encounter scan order
    _, first = np.unique(seg.labels, return_index=True)
    assert np.all(np.diff(first) > 0)


def test_components_require_grid():
    with pytest.raises(ValidationError):
        connected_components(Labeling(np.array([0, 1, 0])))


# -- minimum size ----------------------------------------------------------------------


def test_min_size_identity_when_all_large():
    image = np.zeros((6, 6), dtype=int)
    image[:, 3:] = 1
    seg = connected_components(grid_labeling(image))
    assert np.array_equal(enforce_min_size(seg, 5).labels, seg.labels)


def test_island_absorbed_into_surrounding_region():
    image = np.zeros((8, 8), dtype=int)
    image[3, 3:5] = 1
    out = enforce_min_size(connected_components(grid_labeling(image)), 5)
    assert out.k == 1 and out.params["absorbed_nodes"] == 2


def test_ties_go_to_smaller_label():
    image = np.array([[0, 0, 0, 0, 0, 1, 2, 2, 2, 2, 2]])
    out = enforce_min_size(connected_components(grid_labeling(image)), 5)
    assert out.labels[5] == out.labels[0]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_min_size_postconditions_on_random_images(seed):
    image = np.random.default_rng(seed).integers(0, 3, (12, 12))
    image[:6, :6] = 0  # guarantee one survivor
    out = enforce_min_size(connected_components(grid_labeling(image)), 5)
    assert len(out) == 144
    assert out.sizes.min() >= 5
    assert set(np.unique(out.labels)) == set(range(out.k))


def test_no_survivor_is_an_error():
    board = np.indices((4, 4)).sum(axis=0) % 2
    with pytest.raises(ClusteringError):
        enforce_min_size(connected_components(grid_labeling(board)), 2)


# -- hypergraph and similarity ---------------------------------------------------------


def table_labelings():
    return [np.array(lab) - 1 for lab in TABLE_LABELS]


def test_table_hypergraph_reproduced():
    hyper = build_hypergraph(table_labelings())
    assert hyper.H.shape == (7, 11)
    assert np.array_equal(hyper.H.toarray(), TABLE_H)
    assert hyper.blocks == ((0, 3), (3, 6), (6, 9), (9, 11))


def test_table_similarity_entry():
    S = SimilarityOperator(build_hypergraph(table_labelings())).toarray()
    assert S[0, 1] == 0.75
    assert S[2, 2] == 0.75  # x3 is unassigned in one labeling


def test_identical_labelings_give_binary_similarity(rng):
    lab = rng.integers(0, 4, 50)
    S = SimilarityOperator(build_hypergraph([lab] * 3)).toarray()
    assert set(np.unique(S)) <= {0.0, 1.0}


def test_hypergraph_validation():
    with pytest.raises(ValidationError):
        build_hypergraph([np.array([0, 1])])
    with pytest.raises(ValidationError):
        build_hypergraph([np.array([0, 1]), np.array([0, 1, 1])])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_implicit_operator_matches_dense(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(5, 200))
    labs = [r.integers(-1, int(r.integers(2, 6)), n) for _ in range(int(r.integers(2, 5)))]
    hyper = build_hypergraph(labs)
    Hd = hyper.H.toarray()
    # each row has at most one 1 per labeling block
    for lo, hi in hyper.blocks:
        assert Hd[:, lo:hi].sum(axis=1).max() <= 1
    dense = Hd @ Hd.T / hyper.r
    S = SimilarityOperator(hyper)
    for _ in range(20):
        v = r.standard_normal(n)
        assert np.max(np.abs(dense @ v - S.matvec(v))) <= 1e-12
        assert v @ S.matvec(v) >= -1e-12
    assert dense.min() >= 0 and dense.max() <= 1
    assert np.allclose(dense, dense.T)


def test_full_labeling_gives_unit_diagonal(rng):
    S = SimilarityOperator(build_hypergraph([rng.integers(0, 3, 30) for _ in range(4)]))
    assert np.allclose(np.diag(S.toarray()), 1.0)


def test_normalized_factor_reproduces_normalized_similarity(rng):
    S = SimilarityOperator(build_hypergraph([rng.integers(0, 3, 40) for _ in range(3)]))
    d = S.degrees()
    M = S.normalized_factor(d)
    assert np.allclose(M @ M.T, S.toarray() / np.sqrt(np.outer(d, d)), atol=1e-14)


# -- CSPA -------------------------------------------------------------------------------


def test_unanimous_consensus(rng):
    lab = np.repeat([0, 1, 2], [10, 15, 20])
    out = cspa([lab, lab, lab], k_final=3, seed=0)
    assert adjusted_rand_index(out, lab) == 1.0


def test_permuted_labels_recover_blocks():
    blocks = np.repeat([0, 1], [12, 18])
    out = cspa([blocks, 1 - blocks], k_final=2, seed=0)
    assert adjusted_rand_index(out, blocks) == 1.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_consensus_is_relabel_equivariant(seed):
    r = np.random.default_rng(seed)
    base = np.repeat([0, 1, 2], 15)
    labs = [np.where(r.random(45) < 0.15, r.integers(0, 3, 45), base) for _ in range(4)]
    perm = [r.permutation(3)[lab] for lab in labs]
    a, b = cspa(labs, 3, seed=1), cspa(perm, 3, seed=1)
    assert adjusted_rand_index(a, b) == 1.0


def test_auto_k_uses_eigengap():
    lab = np.repeat([0, 1, 2, 3], 10)
    out = cspa([lab, lab], k_final="auto", seed=0)
    assert out.k == 4 and adjusted_rand_index(out, lab) == 1.0
    assert eigengap_k([1.0, 1.0, 0.9, 0.1, 0.05]) == 3


def test_cspa_rejects_small_k():
    with pytest.raises(ValidationError):
        cspa([np.array([0, 1, 1]), np.array([0, 0, 1])], k_final=1)


# -- pipeline ----------------------------------------------------------------------------


def test_pipeline_needs_two_sets():
    fm = FeatureMatrix(np.zeros((4, 2)), "invariants", ("I1", "I2"), grid_shape=(2, 2))
    with pytest.raises(ValidationError):
        ensemble_pipeline([fm])


def test_pipeline_rejects_mismatched_grids():
    a = FeatureMatrix(np.zeros((4, 2)), "invariants", ("I1", "I2"), grid_shape=(2, 2))
    b = FeatureMatrix(np.zeros((9, 2)), "invariants", ("I1", "I2"), grid_shape=(3, 3))
    with pytest.raises(ValidationError):
        ensemble_pipeline([a, b])


def test_pipeline_on_coarse_circle_is_deterministic_and_accurate():
    sets, truth = [], None
    for bc in ("equibiaxial", "uniaxial_y", "confined_compression"):
        *_, g, truth = coarse_case(bc=bc)
        sets.append(assemble_features(g, "invariants"))
    a = ensemble_pipeline(sets, k_base=2, seed=3)
    b = ensemble_pipeline(sets, k_base=2, seed=3)
    assert np.array_equal(a.labels, b.labels)
    stages = a.params["stages"]
    assert len(stages["base"]) == len(stages["segmented"]) == 3
    assert a.sizes.min() >= 5
    assert adjusted_rand_index(component_ground_truth(truth, (41, 41)), a) > 0.85


def test_pipeline_reports_failing_stage():
    tiny = FeatureMatrix(np.random.default_rng(0).random((9, 2)), "invariants", ("I1", "I2"), grid_shape=(3, 3))
    with pytest.raises(ClusteringError) as info:
        ensemble_pipeline([tiny, tiny], k_base=2, min_size=20)
    assert info.value.stage.startswith("segment")
