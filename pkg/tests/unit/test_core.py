import ast
import pathlib

import numpy as np
import pytest
from scipy.spatial.distance import cdist

import lib
from lib.dataclasses import (
    BandwidthRule,
    ExperimentConfig,
    KMeansConfig,
    PipelineConfig,
    TubeSpec,
    to_plain
)
from lib.domain import DataMatrix, Dendrogram, EdgeList, RngSeed, SkeletonGraph
from lib.errors import IngestionError, UsageError
from lib.services import (
    euclidean_dist,
    knn_radius,
    read_numeric_csv,
    resolve_threads,
    two_nearest_knots
)
from stages.knots.knots_stage import build_knot_set
from tests.unit.oracles import brute_two_nearest


def test_euclidean_dist():
    assert euclidean_dist([0, 0], [3, 4]) == 5.0
    assert euclidean_dist([1.5, -2.0], [1.5, -2.0]) == 0.0
    assert euclidean_dist([1, 1, 1, 1], [0, 0, 0, 0]) == 2.0

    with pytest.raises(UsageError):
        euclidean_dist([0, 0], [0, 0, 0])


def test_two_nearest_knots_simple():
    a1, a2 = two_nearest_knots(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0], [-2.0, 0.0], [0.0, 3.0]]))

    assert a1.tolist() == [0]
    assert a2.tolist() == [1]


def test_two_nearest_knots_breaks_ties_by_index():
    centers = np.array([[9.0], [9.0], [0.0], [9.0], [9.0], [2.0]])
    a1, a2 = two_nearest_knots(np.array([[1.0]]), centers)

    assert (a1[0], a2[0]) == (2, 5)

    centers = np.array([[0.0], [2.0], [4.0]])
    a1, a2 = two_nearest_knots(np.array([[1.0], [3.0], [2.0]]), centers)

    assert a1.tolist() == [0, 1, 1]
    assert a2.tolist() == [1, 2, 0]


@pytest.mark.parametrize('d', [2, 5, 30])
def test_two_nearest_knots_matches_brute_force(d):
    rng = np.random.default_rng(d)
    points = rng.uniform(size=(100, d))
    centers = rng.uniform(size=(5, d))

    a1, a2 = two_nearest_knots(points, centers)
    b1, b2 = brute_two_nearest(points, centers)

    np.testing.assert_array_equal(a1, b1)
    np.testing.assert_array_equal(a2, b2)


def test_two_nearest_knots_needs_two_knots():
    with pytest.raises(UsageError):
        two_nearest_knots(np.zeros((3, 2)), np.zeros((1, 2)))


@pytest.mark.parametrize('d', [3, 25])
def test_knn_radius_matches_sorted_distances(d):
    rng = np.random.default_rng(11)
    points = rng.normal(size=(60, d))
    expected = np.sort(cdist(points, points), axis=1)[:, 4]

    np.testing.assert_allclose(knn_radius(points, 4), expected, rtol=1e-12)


def test_rng_seed_streams():
    assert RngSeed(7).generator().random() == RngSeed(7).generator().random()
    assert RngSeed(5).spawn(3)[1].random() == RngSeed(5).spawn(2)[1].random()

    with pytest.raises(UsageError):
        RngSeed(-1)

    with pytest.raises(UsageError):
        RngSeed(2 ** 64)


def test_data_matrix_validation():
    assert DataMatrix([1.0, 2.0, 3.0]).d == 1

    with pytest.raises(UsageError):
        DataMatrix([[1.0, np.nan]])

    with pytest.raises(UsageError):
        DataMatrix(np.empty((0, 2)))

    data = DataMatrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        data.values[0, 0] = 5.0


def test_knot_set_invariants():
    rng = np.random.default_rng(3)
    data = DataMatrix(rng.uniform(size=(80, 3)))
    knots = build_knot_set(data, rng.uniform(size=(6, 3)))

    assert knots.sizes.sum() == data.n
    assert np.all(knots.assign1 != knots.assign2)
    np.testing.assert_array_equal(knots.sizes, np.bincount(knots.assign1, minlength=6))


def test_skeleton_graph_rejects_negative_weights():
    knots = build_knot_set(DataMatrix([[0.0], [1.0]]), np.array([[0.0], [1.0]]))
    edges = EdgeList(pairs=[[0, 1]], evidence=[2])

    with pytest.raises(UsageError):
        SkeletonGraph(knots=knots, edges=edges, weights=[-1.0], weight_kind='voronoi')


def test_dendrogram_needs_k_minus_one_merges():
    with pytest.raises(UsageError):
        Dendrogram(merges=((0, 1, 1.0),), linkage_kind='single', n_leaves=3)


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv('SKELETON_THREADS', raising=False)
    assert resolve_threads(3) == 3
    assert resolve_threads() >= 1

    monkeypatch.setenv('SKELETON_THREADS', '2')
    assert resolve_threads() == 2
    assert resolve_threads(5) == 5

    monkeypatch.setenv('SKELETON_THREADS', 'many')
    with pytest.raises(UsageError):
        resolve_threads()

    with pytest.raises(UsageError):
        resolve_threads(0)


def test_read_numeric_csv(tmp_path):
    path = tmp_path / 'data.csv'
    path.write_text('x,y,label\n1.0,2.0,0\n3.5,-1,1\n')

    features, labels = read_numeric_csv(str(path), header=True, label_column=-1)

    np.testing.assert_array_equal(features, [[1.0, 2.0], [3.5, -1.0]])
    np.testing.assert_array_equal(labels, [0, 1])


def test_read_numeric_csv_reports_position(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('1,2,3\n4,5,abc\n')

    with pytest.raises(IngestionError) as info:
        read_numeric_csv(str(path))

    assert info.value.row == 2
    assert info.value.col == 3
    assert '(row 2, column 3)' in str(info.value)


def test_read_numeric_csv_rejects_ragged_rows(tmp_path):
    path = tmp_path / 'ragged.csv'
    path.write_text('1,2\n3\n')

    with pytest.raises(IngestionError):
        read_numeric_csv(str(path))


def test_read_numeric_csv_rejects_non_finite(tmp_path):
    path = tmp_path / 'inf.csv'
    path.write_text('1,inf\n')

    with pytest.raises(IngestionError):
        read_numeric_csv(str(path))


def test_kmeans_config_resolves_reference_rule():
    assert KMeansConfig().resolve_k(3200) == 57
    assert KMeansConfig(k=7).resolve_k(10) == 7

    with pytest.raises(UsageError):
        KMeansConfig(k=10).resolve_k(5)

    with pytest.raises(UsageError):
        KMeansConfig(restarts=0)


def test_lib_does_not_import_stages():
    for path in pathlib.Path(lib.__file__).parent.glob('*.py'):
        for node in ast.walk(ast.parse(path.read_text(encoding='utf-8'))):
            if isinstance(node, ast.ImportFrom):
                assert not (node.module or '').startswith('stages'), path.name
            elif isinstance(node, ast.Import):
                assert not any(alias.name.startswith('stages') for alias in node.names), path.name


def test_bandwidth_and_tube_validation():
    with pytest.raises(UsageError):
        BandwidthRule(rate_exponent=-0.5)

    with pytest.raises(UsageError):
        BandwidthRule(mode='fixed')

    assert BandwidthRule(rate_exponent=-1 / 3).rate_exponent == -1 / 3
    assert TubeSpec(R='auto').R == 'auto'

    with pytest.raises(UsageError):
        TubeSpec(R=-1.0)

    with pytest.raises(UsageError):
        TubeSpec(grid_points=1)


def test_pipeline_config_round_trip():
    cfg = PipelineConfig(generator='yinyang', weight='tube', k=40, radius=0.3, clusters=5)

    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    with pytest.raises(UsageError):
        PipelineConfig.from_dict({'generator': 'yinyang', 'colour': 'red'})

    with pytest.raises(UsageError):
        PipelineConfig(generator='yinyang', weight='gabriel')

    with pytest.raises(UsageError):
        PipelineConfig()


def test_experiment_config_validation():
    cfg = ExperimentConfig(repeats=3, first_seed=4)
    assert cfg.seed_list() == [4, 5, 6]
    assert ExperimentConfig(seeds=[9, 2]).seed_list() == [9, 2]

    with pytest.raises(UsageError):
        ExperimentConfig(methods=[])

    with pytest.raises(UsageError):
        ExperimentConfig(methods=['spectral'])

    with pytest.raises(UsageError):
        ExperimentConfig(linkages=['ward'])


def test_to_plain_converts_numpy_values():
    plain = to_plain({'a': np.int64(3), 'b': np.array([1.5, 2.5]), 'c': (np.float64(0.5),)})

    assert plain == {'a': 3, 'b': [1.5, 2.5], 'c': [0.5]}
    assert type(plain['a']) is int
