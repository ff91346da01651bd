"""
Knot construction by overfitted, restarted k-means.

References:
  - NumPy Doc:
        - SeedSequence.spawn: https://numpy.org/doc/stable/reference/random/bit_generators/generated/numpy.random.SeedSequence.spawn.html
  - Python Doc:
        - concurrent.futures.ThreadPoolExecutor: https://docs.python.org/3/library/concurrent.futures.html
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from lib.dataclasses import KMeansConfig
from lib.domain import DataMatrix, KnotSet, RngSeed
from lib.errors import DegenerateInputError, UsageError
from lib.services import two_nearest_knots


logger = logging.getLogger(__name__)

# Relative objective gain a transfer must exceed, so rounding cannot cycle it.
TRANSFER_RTOL = 1e-12


@dataclass(frozen=True)
class LloydRun:
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    history: tuple
    iterations: int


def within_cluster_ss(data: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    diff = data - centers[labels]

    return float(np.einsum('ij,ij->', diff, diff))


def _assign(data: np.ndarray, data_sq: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # data and centers are mean-centred, so the expanded form does not cancel
    dist = data_sq[:, None] - 2.0 * (data @ centers.T) + np.einsum('ij,ij->i', centers, centers)[None, :]

    return np.argmin(dist, axis=1)


def _point_costs(data: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
    diff = data - centers[labels]

    return np.einsum('ij,ij->i', diff, diff)


def _repair_empty(data: np.ndarray, centers: np.ndarray, labels: np.ndarray):
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return centers, labels

    centers = centers.copy()
    labels = labels.copy()
    farthest_first = np.argsort(-_point_costs(data, centers, labels), kind='stable')

    pos = 0
    reseeded = []
    for j in empty:
        # never take the last member of a cluster, that would empty it in turn,
        # nor a duplicate of a point already used as a new center
        while pos < len(farthest_first):
            i = farthest_first[pos]
            pos += 1
            if counts[labels[i]] > 1 and not np.any(np.all(centers[reseeded] == data[i], axis=1)):
                break
        else:
            logger.debug('no observation left to reseed cluster %d', j)
            break

        counts[labels[i]] -= 1
        counts[j] = 1
        labels[i] = j
        centers[j] = data[i]
        reseeded.append(j)

    logger.debug('reseeded %d empty cluster(s)', empty.size)

    return centers, labels


def _update_centers(data: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, data.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, data)

    return sums / counts[:, None]


def kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    k-means++ seeding

    :param data: n x d array
    :param k: number of centers
    :param rng: generator owned by the caller
    :return: k x d initial centers
    """

    n = data.shape[0]
    centers = np.empty((k, data.shape[1]), dtype=np.float64)
    centers[0] = data[rng.integers(n)]

    diff = data - centers[0]
    closest = np.einsum('ij,ij->i', diff, diff)

    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side='right'))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))

        centers[j] = data[idx]
        diff = data - centers[j]
        np.minimum(closest, np.einsum('ij,ij->i', diff, diff), out=closest)

    return centers


def lloyd(data: np.ndarray, init_centers: np.ndarray, max_iters: int = 100, tol: float = 1e-6) -> LloydRun:
    """
    One Lloyd run with empty-cluster repair

    :param data: n x d array
    :param init_centers: k x d starting centers
    :param max_iters: iteration cap
    :param tol: stop once the relative objective decrease falls below this
    :return: LloydRun with the objective after every iteration
    """

    k = init_centers.shape[0]
    offset = data.mean(axis=0)
    data = data - offset
    data_sq = np.einsum('ij,ij->i', data, data)
    centers = np.array(init_centers, dtype=np.float64, copy=True) - offset
    labels = None
    history = []

    for _ in range(max_iters):
        new_labels = _assign(data, data_sq, centers)
        centers, new_labels = _repair_empty(data, centers, new_labels)
        unchanged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels

        centers = _update_centers(data, labels, k)
        objective = within_cluster_ss(data, centers, labels)
        history.append(objective)

        if unchanged:
            break

        if len(history) > 1:
            previous = history[-2]
            if previous <= 0 or (previous - objective) <= tol * previous:
                break

    return LloydRun(
        centers=centers + offset,
        labels=labels,
        objective=history[-1],
        history=tuple(history),
        iterations=len(history)
    )


def hartigan_transfers(data: np.ndarray, labels: np.ndarray, k: int, max_passes: int = 100) -> LloydRun:
    """
    Move single observations between clusters while that lowers the objective

    Moving x from cluster a (size n_a) to b (size n_b) changes the within-cluster
    sum of squares by n_b / (n_b + 1) * |x - c_b|^2 - n_a / (n_a - 1) * |x - c_a|^2.
    Lloyd's nearest-center rule drops both factors, so a cluster of one or two
    observations can keep its members indefinitely once padding noise dominates the
    distances; these transfers let such clusters grow.

    At a fixed point every observation is strictly nearest to its own center,
    so the labels agree with a nearest-center assignment of the returned centers.

    :param data: n x d array
    :param labels: starting labels, every cluster non-empty
    :param k: number of clusters
    :param max_passes: cap on sweeps over the observations
    :return: LloydRun whose history holds the objective after every sweep
    """

    labels = np.array(labels, dtype=np.int64, copy=True)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    if np.any(counts == 0):
        raise UsageError('transfers need every cluster to own an observation')

    centers = _update_centers(data, labels, k)
    sums = centers * counts[:, None]
    history = [within_cluster_ss(data, centers, labels)]

    passes = 0
    for passes in range(1, max_passes + 1):
        moved = 0
        for i in range(data.shape[0]):
            a = labels[i]
            if counts[a] <= 1:
                continue

            diff = centers - data[i]
            dist = np.einsum('ij,ij->i', diff, diff)
            removal = counts[a] / (counts[a] - 1.0) * dist[a]
            addition = counts / (counts + 1.0) * dist
            addition[a] = np.inf
            b = int(np.argmin(addition))
            if removal - addition[b] <= TRANSFER_RTOL * removal:
                continue

            sums[a] -= data[i]
            sums[b] += data[i]
            counts[a] -= 1.0
            counts[b] += 1.0
            centers[a] = sums[a] / counts[a]
            centers[b] = sums[b] / counts[b]
            labels[i] = b
            moved += 1

        # running sums drift, rebuild them from the labels
        centers = _update_centers(data, labels, k)
        sums = centers * counts[:, None]
        history.append(within_cluster_ss(data, centers, labels))

        if moved == 0:
            break

    return LloydRun(
        centers=centers,
        labels=labels,
        objective=history[-1],
        history=tuple(history),
        iterations=passes
    )


def run_restarts(data: DataMatrix, k: int, cfg: KMeansConfig, threads: int = 1) -> list[LloydRun]:
    """
    Every restart of k-means++ seeded Lloyd, in restart order

    :param data: observations
    :param k: knot count
    :param cfg: restarts, iteration cap, tolerance and master seed
    :param threads: worker threads; the result does not depend on it
    :return: one LloydRun per restart
    """

    values = data.values
    if k > data.n:
        raise UsageError(f'k={k} exceeds the number of observations n={data.n}')

    if k > 1 and np.unique(values, axis=0).shape[0] < k:
        raise DegenerateInputError(f'fewer than k={k} distinct observations')

    rngs = RngSeed(cfg.seed).spawn(cfg.restarts)

    def restart(i: int) -> LloydRun:
        init = kmeans_pp_init(values, k, rngs[i])
        return lloyd(values, init, cfg.max_iters, cfg.tol)

    if threads <= 1:
        return [restart(i) for i in range(cfg.restarts)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(restart, range(cfg.restarts)))


def build_knot_set(data: DataMatrix, centers: np.ndarray) -> KnotSet:
    """
    Attach nearest and second-nearest knot assignments to a set of centers

    :param data: observations
    :param centers: k x d knots
    :return: KnotSet
    """

    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] >= 2:
        assign1, assign2 = two_nearest_knots(data, centers)
    else:
        assign1 = np.zeros(data.n, dtype=np.int64)
        assign2 = np.full(data.n, -1, dtype=np.int64)

    knots = KnotSet.from_assignments(centers, assign1, assign2)
    if np.any(knots.sizes == 0):
        logger.warning('%d knot(s) own no observations', int(np.sum(knots.sizes == 0)))

    return knots


def kmeans(data: DataMatrix, cfg: KMeansConfig, threads: int = 1) -> KnotSet:
    """
    Knots from the best of cfg.restarts k-means runs

    :param data: observations
    :param cfg: KMeansConfig
    :param threads: worker threads for the restarts
    :return: KnotSet of the restart with the lowest within-cluster sum of squares, refined by
        single-observation transfers
    """

    k = cfg.resolve_k(data.n)
    runs = run_restarts(data, k, cfg, threads)
    objectives = np.array([run.objective for run in runs])
    # argmin returns the first minimum, so equal objectives resolve to the lower restart
    best = int(np.argmin(objectives))

    logger.info(
        'k-means: k=%d, %d restart(s), best objective %.6g from restart %d',
        k, cfg.restarts, objectives[best], best
    )

    centers = runs[best].centers
    if k > 1 and np.all(np.bincount(runs[best].labels, minlength=k) > 0):
        refined = hartigan_transfers(data.values, runs[best].labels, k, cfg.max_iters)
        logger.info('transfers: objective %.6g after %d pass(es)', refined.objective, refined.iterations)
        centers = refined.centers

    return build_knot_set(data, centers)


def knot_size_histogram(knots: KnotSet) -> list[tuple[int, int]]:
    return [(j, int(size)) for j, size in enumerate(knots.sizes)]
