import json

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage as scipy_linkage
from scipy.spatial.distance import squareform

from lib.domain import DataMatrix, Dendrogram, EdgeList, SkeletonGraph
from lib.errors import UsageError
from stages.knots.knots_stage import build_knot_set
from stages.segmentation.segmentation_stage import (
    SENTINEL,
    assign_labels,
    cut_dendrogram,
    dendrogram_from_dict,
    dendrogram_to_dict,
    dendrogram_to_linkage_matrix,
    hierarchical_cluster,
    minimum_spanning_tree_weights,
    similarity_to_distance,
    skeleton_distance_matrix
)
from tests.unit.oracles import brute_two_nearest, naive_agglomeration, prim_mst_weights, random_distance_matrix


TRIANGLE = np.array([
    [0.0, 1.0, 5.0],
    [1.0, 0.0, 4.0],
    [5.0, 4.0, 0.0]
])


def _same_partition(a, b) -> bool:
    pairs = set(zip(np.asarray(a).tolist(), np.asarray(b).tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def test_similarity_to_distance():
    assert similarity_to_distance([2.0]).tolist() == [0.5]
    assert similarity_to_distance([1.0, 0.25, 4.0]).tolist() == [1.0, 4.0, 0.25]
    assert similarity_to_distance([0.0]).tolist() == [SENTINEL]
    assert similarity_to_distance([1e-320])[0] <= SENTINEL

    with pytest.raises(UsageError):
        similarity_to_distance([1.0, -0.5])


def test_skeleton_distance_matrix_marks_absent_pairs():
    data = DataMatrix([0.0, 1.0, 2.0])
    knots = build_knot_set(data, np.array([[0.0], [1.0], [2.0]]))
    graph = SkeletonGraph(knots=knots, edges=EdgeList(pairs=[[0, 1], [1, 2]], evidence=[1, 1]),
                          weights=[2.0, 0.0], weight_kind='voronoi')

    assert skeleton_distance_matrix(graph).tolist() == [0.5, SENTINEL, SENTINEL]


def test_single_linkage_by_hand():
    dendro = hierarchical_cluster(TRIANGLE, 'single')

    assert dendro.merges == ((0, 1, 1.0), (2, 3, 4.0))


def test_complete_linkage_by_hand():
    dendro = hierarchical_cluster(squareform(TRIANGLE), 'complete')

    assert dendro.merges == ((0, 1, 1.0), (2, 3, 5.0))


def test_average_linkage_by_hand():
    dendro = hierarchical_cluster(TRIANGLE, 'average')

    assert dendro.merges == ((0, 1, 1.0), (2, 3, 4.5))


def test_equal_distances_merge_the_smallest_pair_first():
    dendro = hierarchical_cluster(np.ones(6), 'single')

    assert dendro.merges == ((0, 1, 1.0), (2, 3, 1.0), (4, 5, 1.0))


def test_hierarchical_cluster_rejects_bad_input():
    with pytest.raises(UsageError):
        hierarchical_cluster(TRIANGLE, 'ward')

    with pytest.raises(UsageError):
        hierarchical_cluster(np.array([[0.0, 1.0], [2.0, 0.0]]))

    with pytest.raises(UsageError):
        hierarchical_cluster(np.zeros((1, 1)))


@pytest.mark.parametrize('linkage', ['single', 'average', 'complete'])
def test_agglomeration_matches_naive_oracle(linkage):
    rng = np.random.default_rng(0)
    for _ in range(50):
        dist = random_distance_matrix(rng, 12)
        merges = hierarchical_cluster(dist, linkage).merges
        expected = naive_agglomeration(dist, linkage)

        assert [m[:2] for m in merges] == [m[:2] for m in expected]
        np.testing.assert_allclose([m[2] for m in merges], [m[2] for m in expected], rtol=1e-12)


def test_single_linkage_heights_are_mst_weights():
    rng = np.random.default_rng(1)
    for _ in range(20):
        dist = random_distance_matrix(rng, 15)
        heights = hierarchical_cluster(dist, 'single').heights

        np.testing.assert_allclose(np.sort(heights), prim_mst_weights(dist), rtol=1e-12)
        np.testing.assert_allclose(np.sort(heights), minimum_spanning_tree_weights(dist), rtol=1e-12)


def test_minimum_spanning_tree_needs_positive_distances():
    with pytest.raises(UsageError):
        minimum_spanning_tree_weights(np.zeros(3))


def test_single_linkage_is_invariant_to_monotone_transforms():
    rng = np.random.default_rng(2)
    weights = rng.uniform(0.1, 10.0, size=45)

    plain = hierarchical_cluster(similarity_to_distance(weights), 'single')
    warped = hierarchical_cluster(similarity_to_distance(weights ** 3 + 2.0 * weights), 'single')

    assert [m[:2] for m in plain.merges] == [m[:2] for m in warped.merges]
    for S in range(1, 11):
        np.testing.assert_array_equal(cut_dendrogram(plain, S), cut_dendrogram(warped, S))


@pytest.mark.parametrize('linkage', ['single', 'average', 'complete'])
def test_cuts_refine_each_other(linkage):
    rng = np.random.default_rng(3)
    dendro = hierarchical_cluster(random_distance_matrix(rng, 20), linkage)

    for S in range(2, 21):
        finer = cut_dendrogram(dendro, S)
        coarser = cut_dendrogram(dendro, S - 1)

        assert np.unique(finer).size == S
        for group in np.unique(finer):
            assert np.unique(coarser[finer == group]).size == 1


def test_cut_extremes():
    dendro = hierarchical_cluster(TRIANGLE)

    assert cut_dendrogram(dendro, 1).tolist() == [0, 0, 0]
    assert cut_dendrogram(dendro, 2).tolist() == [0, 0, 1]
    assert cut_dendrogram(dendro, 3).tolist() == [0, 1, 2]

    with pytest.raises(UsageError):
        cut_dendrogram(dendro, 0)

    with pytest.raises(UsageError):
        cut_dendrogram(dendro, 4)


def test_disconnected_components_merge_at_sentinel_height():
    data = DataMatrix([0.0, 1.0, 10.0, 11.0])
    knots = build_knot_set(data, np.array([[0.0], [1.0], [10.0], [11.0]]))
    graph = SkeletonGraph(knots=knots, edges=EdgeList(pairs=[[0, 1], [2, 3]], evidence=[2, 2]),
                          weights=[1.0, 0.5], weight_kind='voronoi')

    dendro = hierarchical_cluster(skeleton_distance_matrix(graph))

    assert dendro.merges[:2] == ((0, 1, 1.0), (2, 3, 2.0))
    assert dendro.merges[2][2] == SENTINEL
    assert cut_dendrogram(dendro, 2).tolist() == [0, 0, 1, 1]


def test_linkage_matrix_agrees_with_scipy():
    rng = np.random.default_rng(4)
    dist = random_distance_matrix(rng, 16)
    dendro = hierarchical_cluster(dist, 'single')
    matrix = dendrogram_to_linkage_matrix(dendro)
    reference = scipy_linkage(squareform(dist), method='single')

    assert matrix[-1, 3] == 16
    np.testing.assert_allclose(matrix[:, 2], reference[:, 2], rtol=1e-12)
    for S in (2, 4, 7):
        assert _same_partition(cut_dendrogram(dendro, S), fcluster(matrix, S, criterion='maxclust'))
        assert _same_partition(cut_dendrogram(dendro, S), fcluster(reference, S, criterion='maxclust'))


def test_assign_labels():
    rng = np.random.default_rng(5)
    points = rng.uniform(size=(200, 2))
    centers = rng.uniform(size=(9, 2))
    knots = build_knot_set(DataMatrix(points), centers)
    groups = rng.integers(0, 3, size=9)

    result = assign_labels(groups, knots)
    nearest, _ = brute_two_nearest(points, centers)

    np.testing.assert_array_equal(result.labels, groups[nearest])
    assert result.S == np.unique(groups).size

    assert assign_labels(np.zeros(9), knots).labels.tolist() == [0] * 200

    with pytest.raises(UsageError):
        assign_labels([0, 1], knots)


def test_two_groups_of_two_knots_label_by_nearest_knot():
    data = DataMatrix([0.0, 0.2, 0.9, 1.0])
    knots = build_knot_set(data, np.array([[0.0], [1.0]]))

    assert assign_labels([0, 1], knots).labels.tolist() == knots.assign1.tolist()


def test_dendrogram_document_round_trip():
    rng = np.random.default_rng(6)
    dendro = hierarchical_cluster(random_distance_matrix(rng, 8), 'average')

    restored = dendrogram_from_dict(json.loads(json.dumps(dendrogram_to_dict(dendro))))

    assert restored == dendro

    with pytest.raises(UsageError):
        dendrogram_from_dict({'merges': [[0, 1, 1.0]]})


def test_dendrogram_record_is_validated():
    with pytest.raises(UsageError):
        Dendrogram(merges=(), linkage_kind='single', n_leaves=2)
