"""
Clustering agreement and density-based denoising.

References:
  - scikit-learn Doc:
        - adjusted_rand_score: https://scikit-learn.org/stable/modules/generated/sklearn.metrics.adjusted_rand_score.html
  - Hubert, L. and Arabie, P. (1985), Comparing partitions, Journal of Classification 2, 193-218
"""

import logging
import math

import numpy as np
from sklearn.metrics import adjusted_rand_score

from lib.domain import DataMatrix, LabeledDataset
from lib.errors import UsageError
from lib.services import knn_radius
from stages.bench.generators import NOISE_LABEL


logger = logging.getLogger(__name__)


def adjusted_rand_index(a, b) -> float:
    """
    Adjusted Rand index of two partitions of the same observations

    :param a: labels of the first partition
    :param b: labels of the second partition, same length
    :return: ARI in [-1, 1]; 1 when the partitions agree
    """

    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise UsageError(f'label vectors differ in length: {a.size} vs {b.size}')

    n = a.size
    if n < 2:
        return 1.0

    return float(adjusted_rand_score(a, b))


def signal_adjusted_rand_index(truth, labels) -> float:
    """
    ARI over the observations whose truth is not NOISE_LABEL

    :param truth: ground truth, possibly containing NOISE_LABEL
    :param labels: predicted labels
    :return: ARI on signal rows only
    """

    truth = np.asarray(truth).ravel()
    labels = np.asarray(labels).ravel()
    if truth.shape != labels.shape:
        raise UsageError(f'label vectors differ in length: {truth.size} vs {labels.size}')

    signal = truth != NOISE_LABEL

    return adjusted_rand_index(truth[signal], labels[signal])


def knn_density_keep(data: DataMatrix, frac: float) -> np.ndarray:
    """
    Rows surviving removal of the lowest-density fraction

    Density is ranked by the distance to the ceil(sqrt(n))-th nearest
    neighbour; a larger distance means a lower density.

    :param data: observations
    :param frac: fraction to drop, 0 <= frac < 1
    :return: ascending row indices kept
    """

    if not 0 <= frac < 1:
        raise UsageError(f'denoise fraction must lie in [0, 1); got {frac}')

    n = data.n
    drop = math.ceil(round(frac * n, 9))
    if drop == 0:
        return np.arange(n)

    kth = min(math.ceil(math.sqrt(n)), n - 1)
    radius = knn_radius(data, kth)
    # stable: among equal radii the lower row index is dropped first
    order = np.argsort(-radius, kind='stable')

    logger.debug('dropping %d of %d observations, %d-NN radius cut %.6g', drop, n, kth, radius[order[drop - 1]])

    return np.sort(order[drop:])


def knn_density_denoise(ds: LabeledDataset, frac: float) -> LabeledDataset:
    if frac == 0:
        return ds

    return ds.subset(knn_density_keep(ds.data, frac))
