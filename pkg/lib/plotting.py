"""
Static SVG figures: the clustered scatter with its skeleton, the knot-size
diagram and the dendrogram.

Figures are built on matplotlib.figure.Figure rather than pyplot so they can
be drawn from worker threads. The SVG hash salt and the missing date keep the
output byte-stable across runs.

References:
  - Matplotlib Doc:
        - Embedding without pyplot: https://matplotlib.org/stable/gallery/user_interfaces/web_application_server_sgskip.html
        - rcParams svg.hashsalt: https://matplotlib.org/stable/users/explain/customizing.html
  - SciPy Doc:
        - scipy.cluster.hierarchy.dendrogram: https://docs.scipy.org/doc/scipy/reference/generated/scipy.cluster.hierarchy.dendrogram.html
"""

import matplotlib

matplotlib.use('Agg')

import numpy as np
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure
from scipy.cluster.hierarchy import dendrogram

from lib.domain import KnotSet, SkeletonGraph


matplotlib.rcParams['svg.hashsalt'] = 'skeleton-clustering'

SVG_METADATA = {'Date': None}


def _save(fig: Figure, path: str) -> None:
    fig.savefig(path, format='svg', metadata=SVG_METADATA)


def plot_clusters(path: str, data: np.ndarray, labels: np.ndarray, graph: SkeletonGraph = None) -> None:
    """
    Scatter of the first two coordinates coloured by label, with knots and skeleton edges on top

    :param path: SVG output path
    :param data: n x d array, d >= 2
    :param labels: length-n labels
    :param graph: optional skeleton to overlay
    """

    fig = Figure(figsize=(6, 6))
    ax = fig.subplots()
    ax.scatter(data[:, 0], data[:, 1], c=labels, s=4, cmap='tab10', linewidths=0)

    if graph is not None:
        centers = graph.knots.centers
        if graph.edges.m:
            segments = np.stack([centers[graph.edges.pairs[:, 0], :2], centers[graph.edges.pairs[:, 1], :2]], axis=1)
            ax.add_collection(LineCollection(segments, colors='black', linewidths=0.6, alpha=0.6))

        ax.scatter(centers[:, 0], centers[:, 1], c='black', s=12, marker='x')

    ax.set_xlabel('x1')
    ax.set_ylabel('x2')
    ax.set_aspect('equal', adjustable='datalim')
    _save(fig, path)


def plot_knot_sizes(path: str, knots: KnotSet) -> None:
    fig = Figure(figsize=(8, 3))
    ax = fig.subplots()
    ax.bar(np.arange(knots.k), knots.sizes, width=0.8, color='tab:blue')
    ax.axhline(knots.n / knots.k, color='black', linewidth=0.8, linestyle='--')
    ax.set_xlabel('knot')
    ax.set_ylabel('observations')
    _save(fig, path)


def plot_dendrogram(path: str, linkage_matrix: np.ndarray, sentinel: float) -> None:
    """
    Dendrogram with sentinel-height merges drawn just above the highest finite merge

    :param path: SVG output path
    :param linkage_matrix: scipy-format linkage matrix
    :param sentinel: height standing for "no edge"
    """

    Z = np.array(linkage_matrix, dtype=np.float64, copy=True)
    finite = Z[:, 2][Z[:, 2] < sentinel]
    cap = 1.1 * finite.max() if finite.size and finite.max() > 0 else 1.0
    Z[:, 2] = np.minimum(Z[:, 2], cap)

    fig = Figure(figsize=(8, 4))
    ax = fig.subplots()
    dendrogram(Z, ax=ax, no_labels=Z.shape[0] > 60, color_threshold=0, above_threshold_color='black')
    ax.set_ylabel('merge height')
    _save(fig, path)
