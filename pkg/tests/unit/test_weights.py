import math

import numpy as np
import pytest

from lib.dataclasses import BandwidthRule, KernelSpec, TubeSpec, WeightParams
from lib.domain import DataMatrix, EdgeList
from lib.errors import DegenerateKnotsError, DegenerateSampleError, UsageError
from stages.knots.knots_stage import build_knot_set
from stages.skeleton.skeleton_stage import approx_delaunay
from stages.weights.weights_stage import (
    avgdist_similarity,
    disk_density_profile,
    face_density,
    project_to_central_line,
    silverman_bandwidth,
    tube_density,
    tube_density_argmin,
    tube_radius_rule,
    voronoi_density,
    weight_skeleton
)
from tests.unit.oracles import brute_voronoi_density, naive_kde


GAUSSIAN = KernelSpec('gaussian')


def _fixed(h):
    return BandwidthRule(mode='fixed', fixed_h=h)


def _two_knots(points, c_j=(0.0, 0.0), c_l=(2.0, 0.0)):
    data = DataMatrix(points)
    return data, build_knot_set(data, np.array([c_j, c_l], dtype=float))


def test_voronoi_density_matches_brute_force():
    rng = np.random.default_rng(0)
    points = rng.uniform(size=(400, 2))
    centers = rng.uniform(size=(7, 2))
    data = DataMatrix(points)
    knots = build_knot_set(data, centers)
    edges = approx_delaunay(knots)

    for j, l in edges.pairs:
        assert voronoi_density((j, l), knots, edges) == pytest.approx(
            brute_voronoi_density(points, centers, j, l), rel=1e-12)


def test_voronoi_density_of_an_unwitnessed_pair_is_zero():
    data, knots = _two_knots([[0.0, 0.0], [2.0, 0.0]])
    edges = EdgeList(pairs=np.empty((0, 2)), evidence=[])

    assert voronoi_density((0, 1), knots, edges) == 0.0


def test_project_to_central_line():
    assert project_to_central_line([1.0, 1.0], [0.0, 0.0], [2.0, 0.0]) == pytest.approx((0.5, 1.0))
    assert project_to_central_line([3.0, 0.0], [0.0, 0.0], [2.0, 0.0]) == pytest.approx((1.5, 0.0))
    assert project_to_central_line([0.0, -2.0], [0.0, 0.0], [2.0, 0.0]) == pytest.approx((0.0, 2.0))

    with pytest.raises(DegenerateKnotsError):
        project_to_central_line([1.0, 1.0], [1.0, 0.0], [1.0, 0.0])


def test_projection_recovers_the_point():
    rng = np.random.default_rng(1)
    c_j, c_l = rng.normal(size=5), rng.normal(size=5)

    for x in rng.normal(size=(50, 5)):
        t, perp = project_to_central_line(x, c_j, c_l)
        foot = c_j + t * (c_l - c_j)

        assert np.dot(x - foot, c_l - c_j) == pytest.approx(0.0, abs=1e-9)
        assert np.linalg.norm(x - foot) == pytest.approx(perp, rel=1e-9)


def test_silverman_bandwidth():
    rule = BandwidthRule()

    assert silverman_bandwidth(1.0, 32, rule) == pytest.approx(2 / 3)
    assert silverman_bandwidth(2.0, 32, rule) == pytest.approx(4 / 3)
    assert silverman_bandwidth(1.0, 27, BandwidthRule(rate_exponent=-1 / 3)) == pytest.approx(4 / 9)
    assert silverman_bandwidth(0.0, 1, _fixed(0.3)) == 0.3

    with pytest.raises(DegenerateSampleError):
        silverman_bandwidth(1.0, 1, rule)

    with pytest.raises(DegenerateSampleError):
        silverman_bandwidth(0.0, 10, rule)


def test_face_density_of_a_single_midpoint_observation():
    data, knots = _two_knots([[1.0, 0.0]])

    assert face_density((0, 1), data, knots, GAUSSIAN, _fixed(0.5)) == pytest.approx(
        1.0 / (math.sqrt(2.0 * math.pi) * 0.5))
    assert face_density((0, 1), data, knots, KernelSpec('uniform'), _fixed(0.5)) == pytest.approx(1.0)


def test_face_density_ignores_distant_observations():
    data, knots = _two_knots([[0.0, 0.1], [0.05, -0.2], [2.0, 0.3], [1.95, 0.0]])

    assert face_density((0, 1), data, knots, GAUSSIAN, _fixed(0.05)) < 1e-30


def test_face_density_matches_naive_kde():
    rng = np.random.default_rng(3)
    points = rng.normal(size=(300, 3))
    centers = np.array([[-1.0, 0.0, 0.0], [1.0, 0.5, 0.0], [0.0, 3.0, 0.0]])
    data = DataMatrix(points)
    knots = build_knot_set(data, centers)
    rule = BandwidthRule()

    cells = (knots.assign1 == 0) | (knots.assign1 == 1)
    direction = centers[1] - centers[0]
    length = float(np.linalg.norm(direction))
    positions = (points[cells] - centers[0]) @ direction / length
    h = 4 / 3 * np.std(positions, ddof=1) * positions.size ** (-1 / 5)

    expected = naive_kde(positions, length / 2, h) / (data.n * h)

    assert face_density((0, 1), data, knots, GAUSSIAN, rule) == pytest.approx(expected, rel=1e-9)


def test_face_density_of_a_uniform_strip():
    rng = np.random.default_rng(4)
    points = np.column_stack([rng.uniform(0.0, 2.0, 20000), rng.uniform(-1.0, 1.0, 20000)])
    data, knots = _two_knots(points)

    # projected positions are uniform on [0, 2], so the marginal density is 1/2
    assert face_density((0, 1), data, knots, GAUSSIAN, _fixed(0.2)) == pytest.approx(0.5, rel=0.15)


def test_tube_radius_rule():
    data = DataMatrix([-1.0, 1.0, 9.0, 11.0])
    knots = build_knot_set(data, np.array([[0.0], [10.0]]))

    assert tube_radius_rule(knots, data) == pytest.approx(1.0)


def test_tube_radius_rule_falls_back_when_cells_collapse():
    data = DataMatrix([0.0, 10.0])
    knots = build_knot_set(data, np.array([[0.0], [10.0]]))

    assert tube_radius_rule(knots, data) == pytest.approx(1.0)


def test_tube_radius_rule_needs_occupied_knots():
    data = DataMatrix([0.0, 0.5])
    knots = build_knot_set(data, np.array([[0.0], [10.0]]))

    with pytest.raises(UsageError):
        tube_radius_rule(knots, data)


def test_empty_tube_is_flagged():
    data, knots = _two_knots([[0.5, 1.0], [1.5, -1.0], [1.0, 1.0]])
    edges = approx_delaunay(knots)
    params = WeightParams(bandwidth=_fixed(0.2), tube=TubeSpec(R=0.1))

    with pytest.raises(DegenerateSampleError):
        tube_density((0, 1), data, knots, GAUSSIAN, params.bandwidth, params.tube)

    graph = weight_skeleton(edges, data, knots, 'tube', params)

    assert graph.weights.tolist() == [0.0]
    assert graph.degenerate_edges == (0,)


def test_tube_profile_of_an_even_line_is_flat():
    xs = np.linspace(-5.0, 7.0, 12001)
    data, knots = _two_knots(np.column_stack([xs, np.zeros_like(xs)]))
    grid, profile = disk_density_profile((0, 1), data, knots, GAUSSIAN, _fixed(0.2), TubeSpec(R=0.5))

    assert grid[0] == 0.0 and grid[-1] == 1.0 and grid.size == 101
    assert np.ptp(profile) / profile.mean() < 1e-3
    assert profile.mean() == pytest.approx(1 / 12, rel=1e-3)


def _blobs(rng, sizes=(500, 500)):
    left = rng.normal((0.0, 0.0), 0.2, size=(sizes[0], 2))
    right = rng.normal((2.0, 0.0), 0.2, size=(sizes[1], 2))
    return np.vstack([left, right])


def test_tube_density_dips_between_two_blobs():
    rng = np.random.default_rng(5)
    left = rng.normal((0.0, 0.0), 0.2, size=(500, 2))
    # mirrored copy keeps the sample symmetric about the midpoint
    right = np.column_stack([2.0 - left[:, 0], left[:, 1]])
    data, knots = _two_knots(np.vstack([left, right]))

    t, value = tube_density_argmin((0, 1), data, knots, GAUSSIAN, _fixed(0.2), TubeSpec(R=0.5))

    assert abs(t - 0.5) <= 0.02
    assert value == pytest.approx(tube_density((0, 1), data, knots, GAUSSIAN, _fixed(0.2), TubeSpec(R=0.5)))


def test_tube_density_is_stable_under_grid_refinement():
    rng = np.random.default_rng(6)
    data, knots = _two_knots(_blobs(rng, (600, 400)))

    coarse = tube_density((0, 1), data, knots, GAUSSIAN, _fixed(0.2), TubeSpec(R=0.5, grid_points=101))
    fine = tube_density((0, 1), data, knots, GAUSSIAN, _fixed(0.2), TubeSpec(R=0.5, grid_points=1001))

    assert fine <= coarse * (1 + 1e-12)
    assert coarse == pytest.approx(fine, rel=0.01)


def test_avgdist_similarity():
    data = DataMatrix([0.0, 1.0, 3.0])
    knots = build_knot_set(data, np.array([[0.5], [3.0]]))

    assert avgdist_similarity((0, 1), data, knots) == pytest.approx(0.4)


def test_avgdist_similarity_needs_both_cells():
    data = DataMatrix([0.0, 1.0])
    knots = build_knot_set(data, np.array([[0.5], [9.0]]))

    with pytest.raises(DegenerateSampleError):
        avgdist_similarity((0, 1), data, knots)


def _all_weights(points, centers, radius=0.6):
    data = DataMatrix(points)
    knots = build_knot_set(data, centers)
    edges = approx_delaunay(knots)
    params = WeightParams(tube=TubeSpec(R=radius))

    return edges.pairs, {
        kind: weight_skeleton(edges, data, knots, kind, params).weights
        for kind in ('voronoi', 'face', 'tube', 'avgdist')
    }


def test_weights_are_rotation_invariant():
    rng = np.random.default_rng(7)
    points = rng.normal(size=(300, 3))
    centers = rng.normal(size=(6, 3))
    rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))

    pairs, weights = _all_weights(points, centers)
    rotated_pairs, rotated = _all_weights(points @ rotation.T, centers @ rotation.T)

    np.testing.assert_array_equal(pairs, rotated_pairs)
    for kind in weights:
        np.testing.assert_allclose(rotated[kind], weights[kind], rtol=1e-9)


def test_weights_ignore_padding_dimensions():
    rng = np.random.default_rng(8)
    points = rng.normal(size=(300, 2))
    centers = rng.normal(size=(5, 2))

    pairs, weights = _all_weights(points, centers)
    padded_pairs, padded = _all_weights(np.pad(points, ((0, 0), (0, 50)), constant_values=5.0),
                                        np.pad(centers, ((0, 0), (0, 50)), constant_values=5.0))

    np.testing.assert_array_equal(pairs, padded_pairs)
    for kind in weights:
        np.testing.assert_allclose(padded[kind], weights[kind], rtol=1e-9)


def test_weights_scale_inversely_with_the_data():
    rng = np.random.default_rng(10)
    points = rng.normal(size=(300, 3))
    centers = rng.normal(size=(6, 3))

    pairs, weights = _all_weights(points, centers)
    scaled_pairs, scaled = _all_weights(3.0 * points, 3.0 * centers, radius=1.8)

    np.testing.assert_array_equal(pairs, scaled_pairs)
    for kind in weights:
        np.testing.assert_allclose(3.0 * scaled[kind], weights[kind], rtol=1e-9)


def test_tube_density_matches_naive_kde():
    rng = np.random.default_rng(11)
    points = rng.normal(size=(400, 3))
    centers = np.array([[-1.0, 0.0, 0.0], [1.0, 0.5, 0.0], [0.0, 3.0, 0.0]])
    data = DataMatrix(points)
    knots = build_knot_set(data, centers)
    tube = TubeSpec(R=0.7, grid_points=41)

    direction = centers[1] - centers[0]
    length = float(np.linalg.norm(direction))
    offset = points - centers[0]
    along = offset @ direction / length
    across = np.linalg.norm(offset - np.outer(along / length, direction), axis=1)
    positions = along[across <= 0.7]
    h = 4 / 3 * np.std(positions, ddof=1) * positions.size ** (-1 / 5)

    expected = min(naive_kde(positions, t * length, h) for t in np.linspace(0.0, 1.0, 41)) / (data.n * h)

    assert tube_density((0, 1), data, knots, GAUSSIAN, BandwidthRule(), tube) == pytest.approx(expected, rel=1e-12)


def test_weight_skeleton_is_independent_of_thread_count():
    rng = np.random.default_rng(9)
    data = DataMatrix(rng.normal(size=(400, 2)))
    knots = build_knot_set(data, rng.normal(size=(10, 2)))
    edges = approx_delaunay(knots)

    serial = weight_skeleton(edges, data, knots, 'face', WeightParams(threads=1))
    parallel = weight_skeleton(edges, data, knots, 'face', WeightParams(threads=4))

    np.testing.assert_array_equal(serial.weights, parallel.weights)


def test_weight_skeleton_rejects_unknown_kind():
    data, knots = _two_knots([[0.0, 0.0], [2.0, 0.0]])

    with pytest.raises(UsageError):
        weight_skeleton(approx_delaunay(knots), data, knots, 'gabriel')


def test_weight_skeleton_without_edges():
    data, knots = _two_knots([[0.0, 0.0], [2.0, 0.0]])
    edges = EdgeList(pairs=np.empty((0, 2)), evidence=[])

    graph = weight_skeleton(edges, data, knots, 'tube')

    assert graph.weights.size == 0
    assert graph.degenerate_edges == ()
