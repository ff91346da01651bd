"""
Approximate Delaunay edges over the knots, read off the 2-NN assignments.

Two knots are joined when at least one observation has exactly that pair as
its two nearest knots; such a witness lies in the shared region of their
Voronoi cells.
"""

import numpy as np

from lib.dataclasses import WEIGHT_KINDS
from lib.domain import DataMatrix, EdgeList, KnotSet, SkeletonGraph
from lib.errors import UsageError
from stages.knots.knots_stage import build_knot_set


def approx_delaunay(knots: KnotSet) -> EdgeList:
    """
    Edges witnessed by 2-NN pairs, with their witness counts

    :param knots: KnotSet with assign1 and assign2 populated
    :return: EdgeList sorted by (min index, max index)
    """

    if knots.k < 2:
        raise UsageError(f'a skeleton needs at least 2 knots; got {knots.k}')

    lo = np.minimum(knots.assign1, knots.assign2)
    hi = np.maximum(knots.assign1, knots.assign2)
    codes = lo * knots.k + hi
    # unique() sorts the codes, which orders pairs by (lo, hi)
    uniq, counts = np.unique(codes, return_counts=True)

    return EdgeList(
        pairs=np.column_stack([uniq // knots.k, uniq % knots.k]),
        evidence=counts
    )


def skeleton_to_dict(graph: SkeletonGraph) -> dict:
    return {
        'knots': graph.knots.centers.tolist(),
        'edges': graph.edges.pairs.tolist(),
        'evidence': graph.edges.evidence.tolist(),
        'weights': graph.weights.tolist(),
        'weight_kind': graph.weight_kind,
        'degenerate_edges': list(graph.degenerate_edges)
    }


def skeleton_from_dict(document: dict, data: DataMatrix) -> SkeletonGraph:
    """
    Rebuild a stored skeleton against a data set for re-segmentation

    :param document: a dict produced by skeleton_to_dict
    :param data: observations; 2-NN assignments are recomputed from them
    :return: SkeletonGraph
    """

    missing = [key for key in ('knots', 'edges', 'evidence', 'weights', 'weight_kind') if key not in document]
    if missing:
        raise UsageError(f'skeleton document lacks {", ".join(missing)}')

    if document['weight_kind'] not in WEIGHT_KINDS:
        raise UsageError(f'unknown weight kind {document["weight_kind"]!r} in skeleton document')

    centers = np.asarray(document['knots'], dtype=np.float64)
    if centers.ndim != 2 or centers.shape[1] != data.d:
        raise UsageError(f'skeleton knots do not match the data dimension d={data.d}')

    pairs = np.asarray(document['edges'], dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= centers.shape[0] or np.any(pairs[:, 0] >= pairs[:, 1])):
        raise UsageError('skeleton edges must be (j, l) knot index pairs with j < l')

    return SkeletonGraph(
        knots=build_knot_set(data, centers),
        edges=EdgeList(pairs=pairs, evidence=document['evidence']),
        weights=document['weights'],
        weight_kind=document['weight_kind'],
        degenerate_edges=tuple(document.get('degenerate_edges', ()))
    )
