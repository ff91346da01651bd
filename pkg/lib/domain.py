"""
Immutable records passed between the pipeline stages.

Arrays are copied on construction and marked read-only, so a record can be
shared freely between worker threads.
"""

from dataclasses import dataclass, field

import numpy as np

from lib.errors import UsageError


def _frozen(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RngSeed:
    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise UsageError(f'seed must be an unsigned 64-bit integer, got {self.seed}')

        object.__setattr__(self, 'seed', int(self.seed))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed))

    def spawn(self, count: int) -> list[np.random.Generator]:
        """
        Independent child streams, one per index

        :param count: number of children
        :return: generators whose i-th entry depends only on (seed, i)
        """

        children = np.random.SeedSequence(self.seed).spawn(count)

        return [np.random.default_rng(child) for child in children]


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]

        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise UsageError(f'data must be a non-empty n x d matrix, got shape {values.shape}')

        if not np.all(np.isfinite(values)):
            raise UsageError('data contains NaN or infinite values')

        object.__setattr__(self, 'values', _frozen(values, np.float64))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class KnotSet:
    centers: np.ndarray
    assign1: np.ndarray
    assign2: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'centers', _frozen(np.atleast_2d(self.centers), np.float64))
        object.__setattr__(self, 'assign1', _frozen(self.assign1, np.int64))
        object.__setattr__(self, 'assign2', _frozen(self.assign2, np.int64))
        object.__setattr__(self, 'sizes', _frozen(self.sizes, np.int64))

        if self.assign1.shape != self.assign2.shape or self.sizes.shape != (self.k,):
            raise UsageError('knot assignments and sizes are inconsistent with the centers')

    @classmethod
    def from_assignments(cls, centers, assign1, assign2) -> 'KnotSet':
        centers = np.atleast_2d(centers)
        sizes = np.bincount(np.asarray(assign1, dtype=np.int64), minlength=centers.shape[0])

        return cls(centers=centers, assign1=assign1, assign2=assign2, sizes=sizes)

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return self.assign1.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class EdgeList:
    pairs: np.ndarray
    evidence: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, 'pairs', _frozen(pairs, np.int64))
        object.__setattr__(self, 'evidence', _frozen(self.evidence, np.int64))

        if self.evidence.shape != (self.m,):
            raise UsageError('one evidence count is needed per edge')

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    def index_of(self, j: int, l: int) -> int:
        """
        Position of the unordered pair in the sorted edge list, -1 if absent

        :param j: knot index
        :param l: knot index
        :return: edge index or -1
        """

        a, b = min(j, l), max(j, l)
        hits = np.flatnonzero((self.pairs[:, 0] == a) & (self.pairs[:, 1] == b))

        return int(hits[0]) if hits.size else -1

    def evidence_for(self, j: int, l: int) -> int:
        idx = self.index_of(j, l)

        return int(self.evidence[idx]) if idx >= 0 else 0


@dataclass(frozen=True)
class SkeletonGraph:
    knots: KnotSet
    edges: EdgeList
    weights: np.ndarray
    weight_kind: str
    degenerate_edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'weights', _frozen(self.weights, np.float64))
        object.__setattr__(self, 'degenerate_edges', tuple(int(e) for e in self.degenerate_edges))

        if self.weights.shape != (self.edges.m,):
            raise UsageError('one weight is needed per edge')

        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise UsageError('edge weights must be finite and nonnegative')


@dataclass(frozen=True)
class Dendrogram:
    merges: tuple
    linkage_kind: str
    n_leaves: int

    def __post_init__(self):
        merges = tuple((int(a), int(b), float(h)) for a, b, h in self.merges)
        object.__setattr__(self, 'merges', merges)

        if len(merges) != max(self.n_leaves - 1, 0):
            raise UsageError(f'{self.n_leaves} leaves need {self.n_leaves - 1} merges, got {len(merges)}')

    @property
    def heights(self) -> np.ndarray:
        return np.array([h for _, _, h in self.merges], dtype=np.float64)


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    knot_groups: np.ndarray
    S: int

    def __post_init__(self):
        object.__setattr__(self, 'labels', _frozen(self.labels, np.int64))
        object.__setattr__(self, 'knot_groups', _frozen(self.knot_groups, np.int64))


@dataclass(frozen=True)
class LabeledDataset:
    data: DataMatrix
    truth: np.ndarray
    name: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'truth', _frozen(self.truth, np.int64))

        if self.truth.shape != (self.data.n,):
            raise UsageError('one truth label is needed per observation')

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def d(self) -> int:
        return self.data.d

    def subset(self, rows) -> 'LabeledDataset':
        rows = np.asarray(rows)

        return LabeledDataset(
            data=DataMatrix(self.data.values[rows]),
            truth=self.truth[rows],
            name=self.name
        )
