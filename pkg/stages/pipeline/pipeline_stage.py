"""
End-to-end skeleton clustering: knots, skeleton, edge weights, segmentation
and label assignment, composed from the stage modules.
"""

import logging
import time
from typing import Optional

from lib.dataclasses import PipelineConfig
from lib.domain import ClusteringResult, DataMatrix, Dendrogram, KnotSet, SkeletonGraph
from lib.errors import UsageError
from stages.knots.knots_stage import kmeans
from stages.segmentation.segmentation_stage import (
    assign_labels,
    cut_dendrogram,
    hierarchical_cluster,
    skeleton_distance_matrix
)
from stages.skeleton.skeleton_stage import approx_delaunay, skeleton_from_dict
from stages.weights.weights_stage import weight_skeleton


logger = logging.getLogger(__name__)


class SkeletonClustering:
    def __init__(self, data: DataMatrix, config: PipelineConfig, threads: int = 1,
                 skeleton_document: Optional[dict] = None):
        started = time.perf_counter()

        self.__data = data
        self.__config = config

        if skeleton_document is None:
            # ---------------------------------------- #
            # Knots
            # ---------------------------------------- #
            self.__knots = kmeans(data, config.kmeans_config(), threads=threads)

            # ---------------------------------------- #
            # Skeleton
            # ---------------------------------------- #
            edges = approx_delaunay(self.__knots)

            # ---------------------------------------- #
            # Edge weights
            # ---------------------------------------- #
            self.__graph = weight_skeleton(
                edges,
                data,
                self.__knots,
                kind=config.weight,
                params=config.weight_params(threads=threads)
            )
        else:
            self.__graph = skeleton_from_dict(skeleton_document, data)
            self.__knots = self.__graph.knots
            logger.info(
                'reusing stored %s skeleton with %d knots and %d edges',
                self.__graph.weight_kind, self.__knots.k, self.__graph.edges.m
            )

        if self.__graph.degenerate_edges:
            logger.warning('%d edge(s) have degenerate weights', len(self.__graph.degenerate_edges))

        if config.clusters > self.__knots.k:
            raise UsageError(f'clusters={config.clusters} exceeds the number of knots k={self.__knots.k}')

        # ---------------------------------------- #
        # Segmentation
        # ---------------------------------------- #
        self.__dendrogram = hierarchical_cluster(skeleton_distance_matrix(self.__graph), config.linkage)
        self.__result = assign_labels(cut_dendrogram(self.__dendrogram, config.clusters), self.__knots)

        self.__wall_seconds = time.perf_counter() - started
        logger.info(
            'clustered n=%d d=%d: k=%d, %d edges, S=%d in %.3fs',
            data.n, data.d, self.__knots.k, self.__graph.edges.m, self.__result.S, self.__wall_seconds
        )

    def get_knots(self) -> KnotSet:
        return self.__knots

    def get_graph(self) -> SkeletonGraph:
        return self.__graph

    def get_dendrogram(self) -> Dendrogram:
        return self.__dendrogram

    def get_result(self) -> ClusteringResult:
        return self.__result

    def get_wall_seconds(self) -> float:
        return self.__wall_seconds

    def get_summary(self) -> str:
        return (
            f'k={self.__knots.k} edges={self.__graph.edges.m} '
            f'S={self.__result.S} wall={self.__wall_seconds:.3f}s'
        )
