"""
Experiment runner: repeated generate / cluster / score studies and the
Voronoi-density convergence check.

Work is shared across sweep axes within one (seed, generator, dimension)
case: the data set is generated once, knots once per k, weights once per
method and bandwidth rate, and the dendrogram once per linkage before it is
cut at every S.

References:
  - Python Doc:
        - concurrent.futures.ThreadPoolExecutor: https://docs.python.org/3/library/concurrent.futures.html
  - SciPy Doc:
        - scipy.cluster.hierarchy.fcluster: https://docs.scipy.org/doc/scipy/reference/generated/scipy.cluster.hierarchy.fcluster.html
"""

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass
from typing import Optional

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from lib.dataclasses import BASELINE_METHODS, ExperimentConfig, GeneratorSpec, KMeansConfig
from lib.domain import DataMatrix, LabeledDataset, RngSeed
from lib.plotting import plot_knot_sizes
from lib.services import resolve_threads, two_nearest_knots, write_csv
from stages.bench.generators import DEFAULT_CLUSTERS, add_noise_points, generate
from stages.bench.metrics import knn_density_denoise, signal_adjusted_rand_index
from stages.knots.knots_stage import build_knot_set, kmeans, knot_size_histogram
from stages.segmentation.segmentation_stage import (
    assign_labels,
    cut_dendrogram,
    hierarchical_cluster,
    skeleton_distance_matrix
)
from stages.skeleton.skeleton_stage import approx_delaunay
from stages.weights.weights_stage import weight_skeleton


logger = logging.getLogger(__name__)

REPORT_HEADER = ['seed', 'generator', 'd', 'method', 'linkage', 'k', 'S', 'ari', 'wall_ms']
SUMMARY_HEADER = ['generator', 'd', 'method', 'linkage', 'k', 'S', 'median_ari', 'runs', 'failures']

# Methods whose estimate depends on the bandwidth rate.
BANDWIDTH_METHODS = ('face', 'tube')


@dataclass(frozen=True)
class ReportRow:
    seed: int
    generator: str
    d: int
    method: str
    linkage: str
    k: object
    S: int
    ari: float
    wall_ms: float

    def as_list(self) -> list:
        return list(astuple(self))


@dataclass(frozen=True)
class _Plan:
    label: str
    method: str
    rate: Optional[float]
    linkage: str
    k: object
    S: int


def _method_label(method: str, rate: Optional[float], cfg: ExperimentConfig) -> str:
    if rate is not None and len(cfg.rate_exponents) > 1:
        return f'{method}@{rate:.3g}'

    return method


def _plan(cfg: ExperimentConfig, generator: str) -> list[_Plan]:
    clusters = cfg.clusters or [DEFAULT_CLUSTERS[generator]]
    plans = []
    for method in cfg.methods:
        if method in BASELINE_METHODS:
            link = 'single' if method == 'sl' else 'none'
            plans += [_Plan(method, method, None, link, None, S) for S in clusters]
            continue

        rates = cfg.rate_exponents if method in BANDWIDTH_METHODS else [None]
        for k in cfg.knots:
            for rate in rates:
                for link in cfg.linkages:
                    plans += [_Plan(_method_label(method, rate, cfg), method, rate, link, k, S) for S in clusters]

    return plans


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def run_baseline(data: DataMatrix, method: str, S: int, seed: int, cfg: ExperimentConfig) -> np.ndarray:
    """
    Labels of a classical comparator applied directly to the observations

    :param data: observations
    :param method: km (k-means with k = S) or sl (single linkage on the raw points)
    :param S: number of clusters
    :param seed: k-means seed
    :param cfg: restarts and iteration settings
    :return: length-n labels
    """

    if method == 'km':
        knots = kmeans(data, KMeansConfig(k=S, restarts=cfg.restarts, max_iters=cfg.max_iters, tol=cfg.tol, seed=seed))
        return np.asarray(knots.assign1)

    Z = linkage(data.values, method='single')

    return fcluster(Z, t=S, criterion='maxclust') - 1


class _Case:
    """
    One (seed, generator, dimension) cell of an experiment.
    """

    def __init__(self, cfg: ExperimentConfig, seed: int, generator: str, d: int, out_dir: Optional[str]):
        self.__cfg = cfg
        self.__seed = seed
        self.__generator = generator
        self.__d = d
        self.__out_dir = out_dir
        self.__results = {}

    def run(self) -> list[ReportRow]:
        plans = _plan(self.__cfg, self.__generator)
        try:
            self.__execute(plans)
        except Exception:
            logger.exception('seed %d, %s d=%d failed', self.__seed, self.__generator, self.__d)

        rows = []
        for plan in plans:
            k, ari, wall_ms = self.__results.get(plan, (plan.k if plan.k is not None else 'none', math.nan, math.nan))
            rows.append(ReportRow(self.__seed, self.__generator, self.__d, plan.label, plan.linkage, k, plan.S, ari, wall_ms))

        return rows

    def __dataset(self) -> LabeledDataset:
        cfg = self.__cfg
        ds = generate(GeneratorSpec(self.__generator, self.__d, cfg.noise_sd, self.__seed))
        if cfg.noise_frac > 0:
            ds = add_noise_points(ds, cfg.noise_frac, self.__seed, cfg.noise_sd)

        if cfg.denoise_frac > 0:
            ds = knn_density_denoise(ds, cfg.denoise_frac)

        return ds

    def __execute(self, plans: list[_Plan]) -> None:
        cfg = self.__cfg
        ds = self.__dataset()

        # ---------------------------------------- #
        # Baselines
        # ---------------------------------------- #
        for plan in plans:
            if plan.method in BASELINE_METHODS:
                started = time.perf_counter()
                labels = run_baseline(ds.data, plan.method, plan.S, self.__seed, cfg)
                k = plan.S if plan.method == 'km' else ds.n
                self.__results[plan] = (k, signal_adjusted_rand_index(ds.truth, labels), _elapsed_ms(started))

        # ---------------------------------------- #
        # Skeleton methods
        # ---------------------------------------- #
        for k_spec in dict.fromkeys(plan.k for plan in plans if plan.k is not None):
            started = time.perf_counter()
            knots = kmeans(ds.data, KMeansConfig(
                k=k_spec,
                restarts=cfg.restarts,
                max_iters=cfg.max_iters,
                tol=cfg.tol,
                seed=self.__seed
            ))
            edges = approx_delaunay(knots)
            knots_ms = _elapsed_ms(started)
            self.__knot_size_diagram(knots)

            weighted = [plan for plan in plans if plan.k == k_spec]
            for method, rate in dict.fromkeys((plan.method, plan.rate) for plan in weighted):
                started = time.perf_counter()
                params = cfg.weight_params(rate if rate is not None else -1 / 5)
                distances = skeleton_distance_matrix(weight_skeleton(edges, ds.data, knots, method, params))
                weights_ms = _elapsed_ms(started)

                same_weights = [plan for plan in weighted if (plan.method, plan.rate) == (method, rate)]
                for link in dict.fromkeys(plan.linkage for plan in same_weights):
                    started = time.perf_counter()
                    dendro = hierarchical_cluster(distances, link)
                    dendro_ms = _elapsed_ms(started)

                    for plan in (p for p in same_weights if p.linkage == link):
                        started = time.perf_counter()
                        result = assign_labels(cut_dendrogram(dendro, plan.S), knots)
                        ari = signal_adjusted_rand_index(ds.truth, result.labels)
                        wall_ms = knots_ms + weights_ms + dendro_ms + _elapsed_ms(started)
                        self.__results[plan] = (knots.k, ari, wall_ms)

    def __knot_size_diagram(self, knots) -> None:
        if not self.__cfg.knot_size_diagrams or self.__out_dir is None:
            return

        stem = os.path.join(
            self.__out_dir,
            f'knot_sizes_{self.__generator}_d{self.__d}_k{knots.k}_seed{self.__seed}'
        )
        write_csv(stem + '.csv', knot_size_histogram(knots), header=['knot', 'size'])
        plot_knot_sizes(stem + '.svg', knots)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> list[ReportRow]:
    """
    Every seed of every (generator, dimension) pair, with all sweeps

    :param cfg: ExperimentConfig
    :param out_dir: where knot-size diagrams go when cfg.knot_size_diagrams is set
    :return: report rows sorted by (seed, method); failed cells carry ari = nan
    """

    cases = [
        _Case(cfg, seed, generator, d, out_dir)
        for seed in cfg.seed_list()
        for generator in cfg.generators
        for d in cfg.dims
    ]
    threads = resolve_threads(cfg.threads)
    logger.info('running %d case(s) on %d thread(s)', len(cases), threads)

    if threads > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda case: case.run(), cases))
    else:
        batches = [case.run() for case in cases]

    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda row: (row.seed, row.method))

    failures = sum(1 for row in rows if math.isnan(row.ari))
    if failures:
        logger.warning('%d of %d report row(s) failed', failures, len(rows))

    return rows


def summarize_report(rows: list[ReportRow]) -> list[list]:
    """
    Median ARI per (generator, d, method, linkage, k, S), in order of first appearance

    :param rows: report rows
    :return: rows matching SUMMARY_HEADER
    """

    groups = {}
    for row in rows:
        groups.setdefault((row.generator, row.d, row.method, row.linkage, row.k, row.S), []).append(row.ari)

    summary = []
    for key, values in groups.items():
        values = np.asarray(values, dtype=np.float64)
        valid = values[~np.isnan(values)]
        median = float(np.median(valid)) if valid.size else math.nan
        summary.append([*key, median, int(valid.size), int(values.size - valid.size)])

    return summary


def write_report(path: str, rows: list[ReportRow]) -> None:
    write_csv(path, (row.as_list() for row in rows), header=REPORT_HEADER)


def write_summary(path: Optional[str], rows: list[ReportRow]) -> None:
    write_csv(path, summarize_report(rows), header=SUMMARY_HEADER)


# ---------------------------------------- #
# Voronoi density convergence
# ---------------------------------------- #
LATTICE_SIDE = 4
LATTICE_JITTER_SD = 0.02
MIN_EDGE_MASS = 0.01


def lattice_knots(seed: int = 0) -> np.ndarray:
    """
    A jittered 4 x 4 lattice of knots in the unit square

    :param seed: jitter seed
    :return: 16 x 2 array
    """

    ticks = (np.arange(LATTICE_SIDE) + 0.5) / LATTICE_SIDE
    grid = np.array([(x, y) for x in ticks for y in ticks])

    return grid + RngSeed(seed).generator().normal(0.0, LATTICE_JITTER_SD, size=grid.shape)


def population_voronoi_density(centers: np.ndarray, grid: int = 1000) -> dict:
    """
    Voronoi density of uniform data on [0, 1]^2 by midpoint quadrature

    :param centers: k x 2 knots
    :param grid: quadrature points per axis
    :return: {(j, l): density} for pairs whose 2-NN region holds at least MIN_EDGE_MASS
    """

    ticks = (np.arange(grid) + 0.5) / grid
    xx, yy = np.meshgrid(ticks, ticks, indexing='ij')
    a1, a2 = two_nearest_knots(np.column_stack([xx.ravel(), yy.ravel()]), centers)

    lo, hi = np.minimum(a1, a2), np.maximum(a1, a2)
    k = centers.shape[0]
    codes, counts = np.unique(lo * k + hi, return_counts=True)
    mass = counts / float(grid * grid)

    density = {}
    for code, share in zip(codes.tolist(), mass.tolist()):
        if share >= MIN_EDGE_MASS:
            j, l = divmod(code, k)
            density[(j, l)] = share / float(np.linalg.norm(centers[j] - centers[l]))

    return density


def max_relative_vd_error(data: np.ndarray, centers: np.ndarray, truth: dict) -> float:
    knots = build_knot_set(DataMatrix(data), centers)
    edges = approx_delaunay(knots)
    errors = [
        abs(edges.evidence_for(j, l) / knots.n / float(np.linalg.norm(centers[j] - centers[l])) / value - 1.0)
        for (j, l), value in truth.items()
    ]

    return max(errors)


def run_vd_rate_experiment(centers: Optional[np.ndarray] = None, sizes=(4000, 16000), seeds=range(50),
                           grid: int = 1000) -> dict:
    """
    Median over seeds of the largest relative Voronoi-density error, per sample size

    :param centers: fixed knots in [0, 1]^2; a jittered lattice when None
    :param sizes: sample sizes to compare
    :param seeds: one uniform sample per seed and size
    :param grid: quadrature resolution for the population density
    :return: {n: median max-edge relative error}
    """

    centers = lattice_knots() if centers is None else np.asarray(centers, dtype=np.float64)
    truth = population_voronoi_density(centers, grid)
    seeds = list(seeds)

    medians = {}
    for n in sizes:
        errors = [max_relative_vd_error(RngSeed(seed).generator().uniform(0.0, 1.0, size=(n, 2)), centers, truth)
                  for seed in seeds]
        medians[n] = float(np.median(errors))
        logger.info('VD rate: n=%d, median max relative error %.4f over %d seed(s)', n, medians[n], len(seeds))

    return medians
