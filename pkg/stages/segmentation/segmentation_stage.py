"""
Knot segmentation: agglomerative clustering of the weighted skeleton, the
dendrogram cut and label propagation to the observations.

Cluster ids follow the scipy convention: leaves are 0..k-1 and the cluster
formed by merge i gets id k + i.

References:
  - SciPy Doc:
        - scipy.cluster.hierarchy.linkage: https://docs.scipy.org/doc/scipy/reference/generated/scipy.cluster.hierarchy.linkage.html
        - scipy.cluster.hierarchy.DisjointSet: https://docs.scipy.org/doc/scipy/reference/generated/scipy.cluster.hierarchy.DisjointSet.html
        - scipy.sparse.csgraph.minimum_spanning_tree: https://docs.scipy.org/doc/scipy/reference/generated/scipy.sparse.csgraph.minimum_spanning_tree.html
"""

import logging

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import squareform

from lib.dataclasses import LINKAGE_KINDS
from lib.domain import ClusteringResult, Dendrogram, KnotSet, SkeletonGraph
from lib.errors import UsageError


logger = logging.getLogger(__name__)

# Distance of knot pairs without a (positive) edge; finite so average linkage stays finite.
SENTINEL = 1e308


def similarity_to_distance(weights) -> np.ndarray:
    """
    Inverse similarity; zero weights map to SENTINEL

    :param weights: nonnegative similarities
    :return: distances of the same shape
    """

    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0):
        raise UsageError('similarities must be nonnegative')

    out = np.full(weights.shape, SENTINEL, dtype=np.float64)
    positive = weights > 0
    with np.errstate(divide='ignore', over='ignore'):
        out[positive] = np.minimum(1.0 / weights[positive], SENTINEL)

    return out


def _condensed_index(k: int, j: np.ndarray, l: np.ndarray) -> np.ndarray:
    return k * j - j * (j + 1) // 2 + (l - j - 1)


def skeleton_distance_matrix(graph: SkeletonGraph) -> np.ndarray:
    """
    Condensed knot distance matrix of a weighted skeleton

    :param graph: SkeletonGraph
    :return: length k(k-1)/2 vector in scipy's condensed order, SENTINEL for absent edges
    """

    k = graph.knots.k
    condensed = np.full(k * (k - 1) // 2, SENTINEL, dtype=np.float64)
    if graph.edges.m:
        pairs = graph.edges.pairs
        condensed[_condensed_index(k, pairs[:, 0], pairs[:, 1])] = similarity_to_distance(graph.weights)

    return condensed


def _square(distances) -> np.ndarray:
    distances = np.asarray(distances, dtype=np.float64)
    if distances.ndim == 1:
        return squareform(distances, checks=False)

    if distances.ndim != 2 or distances.shape[0] != distances.shape[1]:
        raise UsageError(f'distances must be condensed or square; got shape {distances.shape}')

    if not np.array_equal(distances, distances.T):
        raise UsageError('distance matrix is not symmetric')

    return distances.copy()


def _lance_williams(linkage: str, d_a: np.ndarray, d_b: np.ndarray, n_a: int, n_b: int) -> np.ndarray:
    if linkage == 'single':
        return np.minimum(d_a, d_b)

    if linkage == 'complete':
        return np.maximum(d_a, d_b)

    # weights summing to one keep sentinel averages below the float maximum
    total = n_a + n_b
    return d_a * (n_a / total) + d_b * (n_b / total)


def hierarchical_cluster(distances, linkage: str = 'single') -> Dendrogram:
    """
    Agglomerative clustering with Lance-Williams updates

    :param distances: condensed vector or symmetric k x k matrix
    :param linkage: single, average or complete
    :return: Dendrogram; equal distances merge the pair with the smallest (lower id, higher id) first
    """

    if linkage not in LINKAGE_KINDS:
        raise UsageError(f'linkage must be one of {", ".join(LINKAGE_KINDS)}; got {linkage!r}')

    dist = _square(distances)
    k = dist.shape[0]
    if k < 2:
        raise UsageError(f'clustering needs at least 2 knots; got {k}')

    np.fill_diagonal(dist, np.inf)
    ids = np.arange(k)
    sizes = np.ones(k, dtype=np.int64)
    active = np.ones(k, dtype=bool)
    upper = np.triu(np.ones((k, k), dtype=bool), 1)
    merges = []

    for step in range(k - 1):
        live = np.flatnonzero(active)
        sub = dist[np.ix_(live, live)]
        candidates = upper[:live.size, :live.size]
        best = sub[candidates].min()
        rows, cols = np.nonzero(candidates & (sub == best))

        id_lo = np.minimum(ids[live[rows]], ids[live[cols]])
        id_hi = np.maximum(ids[live[rows]], ids[live[cols]])
        pick = np.lexsort((id_hi, id_lo))[0]
        keep, drop = live[rows[pick]], live[cols[pick]]

        merged = _lance_williams(linkage, dist[keep], dist[drop], sizes[keep], sizes[drop])
        dist[keep, :] = merged
        dist[:, keep] = merged
        dist[keep, keep] = np.inf

        merges.append((int(id_lo[pick]), int(id_hi[pick]), float(best)))
        active[drop] = False
        dist[drop, :] = np.inf
        dist[:, drop] = np.inf
        sizes[keep] += sizes[drop]
        ids[keep] = k + step

    if merges and merges[-1][2] >= SENTINEL:
        logger.debug('skeleton is disconnected; final merges happen at the sentinel height')

    return Dendrogram(merges=tuple(merges), linkage_kind=linkage, n_leaves=k)


def cut_dendrogram(dendro: Dendrogram, S: int) -> np.ndarray:
    """
    Partition the leaves into S groups by replaying the first k - S merges

    :param dendro: Dendrogram
    :param S: number of groups, 1 <= S <= k
    :return: group of every knot, numbered in order of each group's smallest knot
    """

    k = dendro.n_leaves
    if not 1 <= S <= k:
        raise UsageError(f'number of clusters must lie in [1, {k}]; got {S}')

    groups = DisjointSet(range(k))
    leaf_of = list(range(k))
    for a, b, _ in dendro.merges[:k - S]:
        groups.merge(leaf_of[a], leaf_of[b])
        leaf_of.append(leaf_of[a])

    numbering = {}
    out = np.empty(k, dtype=np.int64)
    for j in range(k):
        root = groups[j]
        out[j] = numbering.setdefault(root, len(numbering))

    return out


def assign_labels(knot_groups, knots: KnotSet) -> ClusteringResult:
    knot_groups = np.asarray(knot_groups, dtype=np.int64)
    if knot_groups.shape != (knots.k,):
        raise UsageError(f'expected one group per knot ({knots.k}); got {knot_groups.shape[0]}')

    return ClusteringResult(
        labels=knot_groups[knots.assign1],
        knot_groups=knot_groups,
        S=int(np.unique(knot_groups).size)
    )


def dendrogram_to_dict(dendro: Dendrogram) -> dict:
    return {
        'linkage': dendro.linkage_kind,
        'n_leaves': dendro.n_leaves,
        'merges': [[a, b, h] for a, b, h in dendro.merges]
    }


def dendrogram_from_dict(document: dict) -> Dendrogram:
    try:
        return Dendrogram(
            merges=tuple(tuple(merge) for merge in document['merges']),
            linkage_kind=document['linkage'],
            n_leaves=int(document['n_leaves'])
        )
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f'malformed dendrogram document: {e}')


def dendrogram_to_linkage_matrix(dendro: Dendrogram) -> np.ndarray:
    """
    The dendrogram as a scipy linkage matrix

    :param dendro: Dendrogram
    :return: (k - 1) x 4 array of [id a, id b, height, size]
    """

    k = dendro.n_leaves
    sizes = [1] * k
    out = np.empty((len(dendro.merges), 4), dtype=np.float64)
    for step, (a, b, h) in enumerate(dendro.merges):
        sizes.append(sizes[a] + sizes[b])
        out[step] = (a, b, h, sizes[-1])

    return out


def minimum_spanning_tree_weights(distances) -> np.ndarray:
    """
    Sorted edge weights of a minimum spanning tree of the complete distance graph

    :param distances: condensed vector or symmetric matrix of positive distances
    :return: k - 1 weights in ascending order
    """

    dist = _square(distances)
    np.fill_diagonal(dist, 0.0)
    if np.any(dist[~np.eye(dist.shape[0], dtype=bool)] <= 0):
        raise UsageError('minimum spanning tree needs strictly positive off-diagonal distances')

    tree = minimum_spanning_tree(dist)

    return np.sort(tree.data)
