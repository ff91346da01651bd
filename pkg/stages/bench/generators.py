"""
Synthetic benchmark data sets with known ground truth.

Every generator lays its structure out in the first two (three for the
manifold mixture) coordinates and pads the remaining dimensions with
independent N(0, noise_sd^2) noise.

References:
  - NumPy Doc:
        - Generator.uniform: https://numpy.org/doc/stable/reference/random/generated/numpy.random.Generator.uniform.html
  - scikit-learn Doc:
        - make_moons: https://scikit-learn.org/stable/modules/generated/sklearn.datasets.make_moons.html
"""

import logging
import math

import numpy as np
from sklearn.datasets import make_moons

from lib.dataclasses import GeneratorSpec
from lib.domain import DataMatrix, LabeledDataset, RngSeed
from lib.errors import UsageError


logger = logging.getLogger(__name__)

# Truth label of uniform background points.
NOISE_LABEL = -1

# ---------------------------------------- #
# Geometry
# ---------------------------------------- #
YINYANG_OUTER_RADIUS = 3.0
YINYANG_OUTER_SIZE = 2000
YINYANG_ARC_RADIUS = 1.0
YINYANG_ARC_CENTERS = ((0.0, 1.0), (0.0, -1.0))
YINYANG_ARC_SIZE = 400
YINYANG_CLUMP_SD = 0.1
YINYANG_CLUMP_SIZE = 200
YINYANG_JITTER_SD = 0.1

MICKEY_HEAD_RADIUS = 1.0
MICKEY_HEAD_SIZE = 1000
MICKEY_EAR_RADIUS = 0.3
MICKEY_EAR_CENTERS = ((-1.2, 1.2), (1.2, 1.2))
MICKEY_EAR_SIZE = 100

MANIFOLD_PLANE_SIDE = 4.0
MANIFOLD_PLANE_SIZE = 2000
MANIFOLD_BLOB_CENTER = (6.0, 0.0, 0.0)
MANIFOLD_BLOB_SD = 0.5
MANIFOLD_BLOB_SIZE = 400
MANIFOLD_RING_CENTER = (2.0, 6.0, 0.0)
MANIFOLD_RING_RADIUS = 1.5
MANIFOLD_RING_SIZE = 800
MANIFOLD_JITTER_SD = 0.1

RING_SIZE = 1200
RING_PROBABILITY = 1 / 6
RING_SD = 0.2

MIX_MICKEY_CENTERS = ((0.0, 0.0), (3.0, 3.0), (-3.0, 3.0))
MIX_MICKEY_SIZES = (2000, 600, 600)
MIX_MICKEY_VARIANCE = 2.0

MOONS_SIZE = 200
MOONS_NOISE_SD = 0.1

# Relative margin added to each side of the box background noise is drawn from.
NOISE_BOX_MARGIN = 0.05


def _check_dim(name: str, d: int, minimum: int) -> None:
    if d < minimum:
        raise UsageError(f'{name} needs at least {minimum} dimensions; got {d}')


def _pad(signal: np.ndarray, d: int, noise_sd: float, rng: np.random.Generator) -> np.ndarray:
    extra = d - signal.shape[1]
    if extra <= 0:
        return signal

    return np.hstack([signal, rng.normal(0.0, noise_sd, size=(signal.shape[0], extra))])


def _circle(rng: np.random.Generator, size: int, center, radius: float, jitter: float,
            low: float = 0.0, high: float = 2 * math.pi) -> np.ndarray:
    theta = rng.uniform(low, high, size)
    r = radius + rng.normal(0.0, jitter, size)

    return np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])


def _disk(rng: np.random.Generator, size: int, center, radius: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2 * math.pi, size)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size))

    return np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])


def _dataset(parts: list, d: int, noise_sd: float, rng: np.random.Generator, name: str) -> LabeledDataset:
    signal = np.vstack(parts)
    truth = np.concatenate([np.full(part.shape[0], label, dtype=np.int64) for label, part in enumerate(parts)])

    return LabeledDataset(data=DataMatrix(_pad(signal, d, noise_sd, rng)), truth=truth, name=name)


def gen_yinyang(d: int = 2, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    Outer circle, two opposite semi-circles and two clumps

    :param d: ambient dimension, at least 2
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 3200 observations, truth sizes (2000, 400, 400, 200, 200)
    """

    _check_dim('yinyang', d, 2)
    rng = RngSeed(seed).generator()

    upper, lower = YINYANG_ARC_CENTERS
    parts = [
        _circle(rng, YINYANG_OUTER_SIZE, (0.0, 0.0), YINYANG_OUTER_RADIUS, YINYANG_JITTER_SD),
        _circle(rng, YINYANG_ARC_SIZE, upper, YINYANG_ARC_RADIUS, YINYANG_JITTER_SD, 0.0, math.pi),
        _circle(rng, YINYANG_ARC_SIZE, lower, YINYANG_ARC_RADIUS, YINYANG_JITTER_SD, math.pi, 2 * math.pi),
        rng.normal(upper, YINYANG_CLUMP_SD, size=(YINYANG_CLUMP_SIZE, 2)),
        rng.normal(lower, YINYANG_CLUMP_SD, size=(YINYANG_CLUMP_SIZE, 2))
    ]

    return _dataset(parts, d, noise_sd, rng, 'yinyang')


def gen_mickey(d: int = 2, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    A large uniform disk and two small ones

    :param d: ambient dimension, at least 2
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 1200 observations, truth sizes (1000, 100, 100)
    """

    _check_dim('mickey', d, 2)
    rng = RngSeed(seed).generator()

    parts = [_disk(rng, MICKEY_HEAD_SIZE, (0.0, 0.0), MICKEY_HEAD_RADIUS)]
    parts += [_disk(rng, MICKEY_EAR_SIZE, center, MICKEY_EAR_RADIUS) for center in MICKEY_EAR_CENTERS]

    return _dataset(parts, d, noise_sd, rng, 'mickey')


def gen_manifold_mixture(d: int = 3, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    A 2-D plane, a 3-D Gaussian blob and a 1-D ring in the first three coordinates

    :param d: ambient dimension, at least 3
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 3200 observations, truth sizes (2000, 400, 800)
    """

    _check_dim('manifold_mixture', d, 3)
    rng = RngSeed(seed).generator()

    plane = np.column_stack([
        rng.uniform(0.0, MANIFOLD_PLANE_SIDE, size=(MANIFOLD_PLANE_SIZE, 2)),
        np.zeros(MANIFOLD_PLANE_SIZE)
    ])
    blob = rng.normal(MANIFOLD_BLOB_CENTER, MANIFOLD_BLOB_SD, size=(MANIFOLD_BLOB_SIZE, 3))

    theta = rng.uniform(0.0, 2 * math.pi, MANIFOLD_RING_SIZE)
    ring = np.column_stack([
        MANIFOLD_RING_CENTER[0] + MANIFOLD_RING_RADIUS * np.cos(theta),
        MANIFOLD_RING_CENTER[1] + MANIFOLD_RING_RADIUS * np.sin(theta),
        np.full(MANIFOLD_RING_SIZE, MANIFOLD_RING_CENTER[2])
    ])
    ring += rng.normal(0.0, MANIFOLD_JITTER_SD, size=ring.shape)

    return _dataset([plane, blob, ring], d, noise_sd, rng, 'manifold_mixture')


def gen_ring(d: int = 2, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    A Gaussian core inside a noisy unit circle, mixed 5:1

    :param d: ambient dimension, at least 2
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 1200 observations; truth 0 for the core and 1 for the ring
    """

    _check_dim('ring', d, 2)
    rng = RngSeed(seed).generator()

    truth = (rng.uniform(0.0, 1.0, RING_SIZE) < RING_PROBABILITY).astype(np.int64)
    theta = rng.uniform(0.0, 2 * math.pi, RING_SIZE)
    circle = np.column_stack([np.cos(theta), np.sin(theta)]) * truth[:, None]
    signal = circle + rng.normal(0.0, RING_SD, size=(RING_SIZE, 2))

    return LabeledDataset(data=DataMatrix(_pad(signal, d, noise_sd, rng)), truth=truth, name='ring')


def gen_mix_mickey(d: int = 2, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    Three overlapping Gaussians with covariance 2I

    :param d: ambient dimension, 2 unless padding is wanted
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 3200 observations, truth sizes (2000, 600, 600)
    """

    _check_dim('mix_mickey', d, 2)
    rng = RngSeed(seed).generator()

    sd = math.sqrt(MIX_MICKEY_VARIANCE)
    parts = [rng.normal(center, sd, size=(size, 2)) for center, size in zip(MIX_MICKEY_CENTERS, MIX_MICKEY_SIZES)]

    return _dataset(parts, d, noise_sd, rng, 'mix_mickey')


def gen_two_moons(d: int = 2, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    Two interleaving half circles

    :param d: ambient dimension, at least 2
    :param seed: RNG seed
    :param noise_sd: sd of the padding dimensions
    :return: 400 observations, truth sizes (200, 200)
    """

    _check_dim('two_moons', d, 2)
    rng = RngSeed(seed).generator()

    signal, truth = make_moons(
        n_samples=(MOONS_SIZE, MOONS_SIZE),
        shuffle=False,
        noise=MOONS_NOISE_SD,
        random_state=int(rng.integers(2 ** 31 - 1))
    )

    return LabeledDataset(data=DataMatrix(_pad(signal, d, noise_sd, rng)), truth=truth, name='two_moons')


GENERATORS = {
    'yinyang': gen_yinyang,
    'mickey': gen_mickey,
    'manifold_mixture': gen_manifold_mixture,
    'ring': gen_ring,
    'mix_mickey': gen_mix_mickey,
    'two_moons': gen_two_moons
}

MIN_DIMS = {name: 3 if name == 'manifold_mixture' else 2 for name in GENERATORS}

DEFAULT_CLUSTERS = {
    'yinyang': 5,
    'mickey': 3,
    'manifold_mixture': 3,
    'ring': 2,
    'mix_mickey': 3,
    'two_moons': 2
}


def generate(spec: GeneratorSpec) -> LabeledDataset:
    if spec.name not in GENERATORS:
        raise UsageError(f'unknown generator {spec.name!r}; choose one of {", ".join(GENERATORS)}')

    return GENERATORS[spec.name](spec.ambient_dim, spec.seed, spec.noise_sd)


def add_noise_points(ds: LabeledDataset, frac: float, seed: int = 0, noise_sd: float = 0.1) -> LabeledDataset:
    """
    Append uniform background points labelled NOISE_LABEL

    :param ds: signal data set
    :param frac: number of added points as a fraction of the signal size
    :param seed: RNG seed; draws come from a child stream, independent of the generator's
    :param noise_sd: sd of the coordinates beyond the first two
    :return: original rows followed by round(frac * n) noise rows
    """

    if not 0 <= frac <= 1:
        raise UsageError(f'noise fraction must lie in [0, 1]; got {frac}')

    count = int(math.floor(frac * ds.n + 0.5))
    if count == 0:
        return ds

    rng = RngSeed(seed).spawn(1)[0]
    box = ds.data.values[:, :min(2, ds.d)]
    low, high = box.min(axis=0), box.max(axis=0)
    margin = NOISE_BOX_MARGIN * (high - low)

    noise = rng.uniform(low - margin, high + margin, size=(count, box.shape[1]))
    if ds.d > box.shape[1]:
        noise = np.hstack([noise, rng.normal(0.0, noise_sd, size=(count, ds.d - box.shape[1]))])

    logger.debug('added %d noise points to %s', count, ds.name or 'data set')

    return LabeledDataset(
        data=DataMatrix(np.vstack([ds.data.values, noise])),
        truth=np.concatenate([ds.truth, np.full(count, NOISE_LABEL, dtype=np.int64)]),
        name=ds.name
    )
