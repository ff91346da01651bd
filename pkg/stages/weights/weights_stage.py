"""
Edge weights: Voronoi, Face and Tube density, and the average-distance baseline.

Face and Tube density reduce to 1-D kernel density estimates of the
observations projected onto the central line through two knots, so their
cost does not grow with the ambient dimension beyond the projection.

References:
  - SciPy Doc:
        - scipy.spatial.distance.cdist: https://docs.scipy.org/doc/scipy/reference/generated/scipy.spatial.distance.cdist.html
        - scipy.spatial.distance.pdist: https://docs.scipy.org/doc/scipy/reference/generated/scipy.spatial.distance.pdist.html
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.spatial.distance import cdist, pdist

from lib.dataclasses import (
    WEIGHT_KINDS,
    BandwidthRule,
    KernelSpec,
    TubeSpec,
    WeightParams
)
from lib.domain import DataMatrix, EdgeList, KnotSet, SkeletonGraph
from lib.errors import DegenerateKnotsError, DegenerateSampleError, UsageError


logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Disk-density profile rows evaluated per block of grid points.
GRID_BLOCK = 512


def kernel_values(u: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if kernel.kind == 'gaussian':
        return np.exp(-0.5 * u * u) / SQRT_2PI

    return 0.5 * (np.abs(u) <= 1.0)


def _edge_geometry(edge, knots: KnotSet):
    j, l = int(edge[0]), int(edge[1])
    c_j = knots.centers[j]
    c_l = knots.centers[l]
    length = float(np.linalg.norm(c_l - c_j))
    if length == 0.0:
        raise DegenerateKnotsError(f'knots {j} and {l} coincide')

    return j, l, c_j, c_l, length


def _project_points(points: np.ndarray, c_j: np.ndarray, c_l: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    direction = c_l - c_j
    offset = points - c_j
    t = offset @ direction / np.dot(direction, direction)
    residual = offset - t[:, None] * direction

    return t, np.sqrt(np.einsum('ij,ij->i', residual, residual))


def project_to_central_line(x, c_j, c_l) -> tuple[float, float]:
    """
    Position of x along the line c_j + t (c_l - c_j) and its distance to that line

    :param x: d-vector
    :param c_j: knot at t = 0
    :param c_l: knot at t = 1
    :return: (t, perpendicular distance)
    """

    c_j = np.asarray(c_j, dtype=np.float64).ravel()
    c_l = np.asarray(c_l, dtype=np.float64).ravel()
    if not np.any(c_l != c_j):
        raise DegenerateKnotsError('central line is undefined for coincident knots')

    t, perp = _project_points(np.asarray(x, dtype=np.float64).reshape(1, -1), c_j, c_l)

    return float(t[0]), float(perp[0])


def silverman_bandwidth(sigma_hat: float, n_loc: int, rule: BandwidthRule) -> float:
    """
    Normal-scale bandwidth h = 4/3 * sigma * n_loc ** rate

    :param sigma_hat: standard deviation of the projected sample
    :param n_loc: number of points entering the estimate
    :param rule: BandwidthRule; a fixed rule returns its fixed_h
    :return: h > 0
    """

    if rule.mode == 'fixed':
        return float(rule.fixed_h)

    if n_loc < 2:
        raise DegenerateSampleError(f'bandwidth needs at least 2 points; got {n_loc}')

    if not sigma_hat > 0:
        raise DegenerateSampleError('bandwidth needs a projected sample with positive spread')

    return 4.0 / 3.0 * sigma_hat * n_loc ** rule.rate_exponent


def _edge_bandwidth(positions: np.ndarray, rule: BandwidthRule) -> float:
    if rule.mode == 'fixed':
        return float(rule.fixed_h)

    if positions.size < 2:
        raise DegenerateSampleError(f'bandwidth needs at least 2 points; got {positions.size}')

    return silverman_bandwidth(float(np.std(positions, ddof=1)), positions.size, rule)


def voronoi_density(edge, knots: KnotSet, edges: EdgeList) -> float:
    """
    Share of observations whose two nearest knots are the edge, over the knot distance

    :param edge: (j, l)
    :param knots: KnotSet
    :param edges: EdgeList carrying the witness counts
    :return: P_n(A_jl) / ||c_j - c_l||
    """

    j, l, _, _, length = _edge_geometry(edge, knots)

    return edges.evidence_for(j, l) / knots.n / length


def face_density(edge, data: DataMatrix, knots: KnotSet, kernel: KernelSpec, bw: BandwidthRule) -> float:
    """
    Projected KDE of the two cells' points, evaluated at the midpoint of the central line

    :param edge: (j, l)
    :param data: observations
    :param knots: KnotSet
    :param kernel: KernelSpec
    :param bw: BandwidthRule
    :return: face density estimate, normalised by the total sample size
    """

    j, l, c_j, c_l, length = _edge_geometry(edge, knots)
    cells = (knots.assign1 == j) | (knots.assign1 == l)
    if not np.any(cells):
        raise DegenerateSampleError(f'cells of edge ({j}, {l}) are empty')

    t, _ = _project_points(data.values[cells], c_j, c_l)
    positions = t * length
    h = _edge_bandwidth(positions, bw)

    return float(kernel_values((positions - 0.5 * length) / h, kernel).sum() / (data.n * h))


def tube_radius_rule(knots: KnotSet, data: DataMatrix) -> float:
    """
    Root of the average within-cell mean squared deviation, one radius for all edges

    :param knots: KnotSet
    :param data: observations
    :return: R > 0
    """

    if np.any(knots.sizes == 0):
        raise UsageError('tube radius rule needs every knot to own at least one observation')

    diff = data.values - knots.centers[knots.assign1]
    costs = np.einsum('ij,ij->i', diff, diff)
    cell_means = np.bincount(knots.assign1, weights=costs, minlength=knots.k) / knots.sizes
    radius = float(np.sqrt(cell_means.mean()))

    if radius > 0:
        return radius

    gaps = pdist(knots.centers) if knots.k >= 2 else np.empty(0)
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        raise DegenerateKnotsError('tube radius is zero and no two knots are apart')

    radius = 0.1 * float(gaps.min())
    logger.warning('observations coincide with their knots; tube radius set to %.6g', radius)

    return radius


def _resolve_tube(tube: TubeSpec, knots: KnotSet, data: DataMatrix) -> TubeSpec:
    if tube.R == 'auto':
        return replace(tube, R=tube_radius_rule(knots, data))

    return tube


def disk_density_profile(edge, data: DataMatrix, knots: KnotSet, kernel: KernelSpec,
                         bw: BandwidthRule, tube: TubeSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Estimated disk density along the central line

    :param edge: (j, l)
    :param data: observations
    :param knots: KnotSet
    :param kernel: KernelSpec
    :param bw: BandwidthRule
    :param tube: TubeSpec, radius and grid size
    :return: (grid over t in [0, 1], disk density at each grid point)
    """

    tube = _resolve_tube(tube, knots, data)
    j, l, c_j, c_l, length = _edge_geometry(edge, knots)

    t, perp = _project_points(data.values, c_j, c_l)
    inside = perp <= tube.R
    if not np.any(inside):
        raise DegenerateSampleError(f'tube of edge ({j}, {l}) is empty')

    positions = t[inside] * length
    h = _edge_bandwidth(positions, bw)

    grid = np.linspace(0.0, 1.0, tube.grid_points)
    profile = np.empty(grid.size, dtype=np.float64)
    for start in range(0, grid.size, GRID_BLOCK):
        anchors = grid[start:start + GRID_BLOCK, None] * length
        profile[start:start + GRID_BLOCK] = kernel_values((positions[None, :] - anchors) / h, kernel).sum(axis=1)

    return grid, profile / (data.n * h)


def tube_density_argmin(edge, data: DataMatrix, knots: KnotSet, kernel: KernelSpec,
                        bw: BandwidthRule, tube: TubeSpec) -> tuple[float, float]:
    grid, profile = disk_density_profile(edge, data, knots, kernel, bw, tube)
    # argmin takes the first minimum, i.e. the smaller t
    best = int(np.argmin(profile))

    return float(grid[best]), float(profile[best])


def tube_density(edge, data: DataMatrix, knots: KnotSet, kernel: KernelSpec,
                 bw: BandwidthRule, tube: TubeSpec) -> float:
    """
    Minimum disk density over the grid on the central line

    :param edge: (j, l)
    :param data: observations
    :param knots: KnotSet
    :param kernel: KernelSpec
    :param bw: BandwidthRule
    :param tube: TubeSpec
    :return: tube density estimate
    """

    _, profile = disk_density_profile(edge, data, knots, kernel, bw, tube)

    return float(profile.min())


def avgdist_similarity(edge, data: DataMatrix, knots: KnotSet) -> float:
    """
    Inverse of the mean distance between the two cells' observations

    :param edge: (j, l)
    :param data: observations
    :param knots: KnotSet
    :return: 1 / mean pairwise distance
    """

    j, l = int(edge[0]), int(edge[1])
    cell_j = data.values[knots.assign1 == j]
    cell_l = data.values[knots.assign1 == l]
    if cell_j.shape[0] == 0 or cell_l.shape[0] == 0:
        raise DegenerateSampleError(f'a cell of edge ({j}, {l}) is empty')

    mean = float(cdist(cell_j, cell_l).mean())
    if mean == 0.0:
        raise DegenerateSampleError(f'cells of edge ({j}, {l}) coincide')

    return 1.0 / mean


def weight_skeleton(edges: EdgeList, data: DataMatrix, knots: KnotSet, kind: str,
                    params: WeightParams = None) -> SkeletonGraph:
    """
    Weigh every edge with the chosen similarity

    :param edges: EdgeList from approx_delaunay
    :param data: observations
    :param knots: KnotSet
    :param kind: voronoi, face, tube or avgdist
    :param params: kernel, bandwidth, tube and thread settings
    :return: SkeletonGraph; degenerate edges get weight 0 and are listed in degenerate_edges
    """

    if kind not in WEIGHT_KINDS:
        raise UsageError(f'weight kind must be one of {", ".join(WEIGHT_KINDS)}; got {kind!r}')

    params = params or WeightParams()

    if kind == 'voronoi':
        def estimate(edge):
            return voronoi_density(edge, knots, edges)
    elif kind == 'face':
        def estimate(edge):
            return face_density(edge, data, knots, params.kernel, params.bandwidth)
    elif kind == 'tube':
        tube = _resolve_tube(params.tube, knots, data) if edges.m else params.tube

        def estimate(edge):
            return tube_density(edge, data, knots, params.kernel, params.bandwidth, tube)
    else:
        def estimate(edge):
            return avgdist_similarity(edge, data, knots)

    def weigh(idx: int) -> tuple[float, bool]:
        edge = edges.pairs[idx]
        try:
            return estimate(edge), False
        except DegenerateSampleError as e:
            logger.warning('edge (%d, %d) weighted 0: %s', edge[0], edge[1], e)
            return 0.0, True

    if params.threads > 1 and edges.m > 1:
        with ThreadPoolExecutor(max_workers=params.threads) as pool:
            results = list(pool.map(weigh, range(edges.m)))
    else:
        results = [weigh(idx) for idx in range(edges.m)]

    return SkeletonGraph(
        knots=knots,
        edges=edges,
        weights=np.array([w for w, _ in results], dtype=np.float64),
        weight_kind=kind,
        degenerate_edges=tuple(idx for idx, (_, flagged) in enumerate(results) if flagged)
    )
