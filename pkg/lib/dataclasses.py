"""
Configuration records for every stage of the pipeline.

References:
  - Python Doc:
        - dataclasses: https://docs.python.org/3/library/dataclasses.html
        - json: https://docs.python.org/3/library/json.html
  - NumPy Doc:
        - Random Generator: https://numpy.org/doc/stable/reference/random/generator.html
"""

import math
from dataclasses import dataclass, field, fields, asdict
from typing import Optional, Union

import numpy as np

from lib.errors import UsageError


WEIGHT_KINDS = ('voronoi', 'face', 'tube', 'avgdist')
LINKAGE_KINDS = ('single', 'average', 'complete')
KERNEL_KINDS = ('gaussian', 'uniform')
BANDWIDTH_MODES = ('silverman_rate', 'fixed')
BASELINE_METHODS = ('km', 'sl')

RATE_EXPONENT_RANGE = (-1 / 3, -1 / 10)


def _check_choice(name: str, value, choices) -> None:
    if value not in choices:
        raise UsageError(f'{name} must be one of {", ".join(choices)}; got {value!r}')


def _parse_auto(name: str, value, cast):
    if value is None or value == 'auto':
        return 'auto'

    try:
        parsed = cast(value)
    except (TypeError, ValueError):
        raise UsageError(f'{name} must be "auto" or a number; got {value!r}')

    if parsed <= 0:
        raise UsageError(f'{name} must be positive; got {value!r}')

    return parsed


def reference_knot_count(n: int) -> int:
    """
    Reference rule k = [sqrt(n)], rounded to the nearest integer

    :param n: sample size
    :return: knot count, at least 1
    """

    if n < 1:
        raise UsageError(f'sample size must be positive; got {n}')

    return max(1, int(math.floor(math.sqrt(n) + 0.5)))


@dataclass
class KMeansConfig:
    k: Union[int, str] = 'auto'
    restarts: int = 1000
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        self.k = _parse_auto('k', self.k, int)

        if self.restarts < 1:
            raise UsageError(f'restarts must be at least 1; got {self.restarts}')

        if self.max_iters < 1:
            raise UsageError(f'max_iters must be at least 1; got {self.max_iters}')

        if self.tol < 0:
            raise UsageError(f'tol must be nonnegative; got {self.tol}')

    def resolve_k(self, n: int) -> int:
        """
        Knot count for a sample of size n

        :param n: sample size
        :return: the configured k, or the reference rule when k is "auto"
        """

        k = reference_knot_count(n) if self.k == 'auto' else self.k
        if k > n:
            raise UsageError(f'k={k} exceeds the number of observations n={n}')

        return k


@dataclass
class KernelSpec:
    kind: str = 'gaussian'

    def __post_init__(self):
        _check_choice('kernel', self.kind, KERNEL_KINDS)


@dataclass
class BandwidthRule:
    mode: str = 'silverman_rate'
    rate_exponent: float = -1 / 5
    fixed_h: Optional[float] = None

    def __post_init__(self):
        _check_choice('bandwidth mode', self.mode, BANDWIDTH_MODES)

        low, high = RATE_EXPONENT_RANGE
        if not low - 1e-12 <= self.rate_exponent <= high + 1e-12:
            raise UsageError(f'rate exponent must lie in [-1/3, -1/10]; got {self.rate_exponent}')

        if self.mode == 'fixed' and (self.fixed_h is None or self.fixed_h <= 0):
            raise UsageError('a fixed bandwidth needs a positive fixed_h')


@dataclass
class TubeSpec:
    R: Union[float, str] = 'auto'
    grid_points: int = 101

    def __post_init__(self):
        self.R = _parse_auto('tube radius', self.R, float)

        if self.grid_points < 2:
            raise UsageError(f'grid_points must be at least 2; got {self.grid_points}')


@dataclass
class WeightParams:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule)
    tube: TubeSpec = field(default_factory=TubeSpec)
    threads: int = 1


@dataclass
class GeneratorSpec:
    name: str
    ambient_dim: int = 2
    noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise UsageError(f'noise_sd must be nonnegative; got {self.noise_sd}')


@dataclass
class PipelineConfig:
    """
    Flat, JSON-serializable description of one ``cluster`` run.
    """

    input: Optional[str] = None
    generator: Optional[str] = None
    dim: int = 2
    header: bool = False
    label_column: Optional[int] = None
    skeleton: Optional[str] = None
    k: Union[int, str] = 'auto'
    weight: str = 'voronoi'
    kernel: str = 'gaussian'
    bandwidth: str = 'silverman_rate'
    rate_exponent: float = -1 / 5
    fixed_h: Optional[float] = None
    radius: Union[float, str] = 'auto'
    grid_points: int = 101
    linkage: str = 'single'
    clusters: int = 2
    restarts: int = 1000
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    threads: Optional[int] = None
    out_dir: str = 'out'

    def __post_init__(self):
        _check_choice('weight', self.weight, WEIGHT_KINDS)
        _check_choice('linkage', self.linkage, LINKAGE_KINDS)

        if self.input is None and self.generator is None:
            raise UsageError('either an input file or a generator is required')

        if self.input is not None and self.generator is not None:
            raise UsageError('give an input file or a generator, not both')

        if self.clusters < 1:
            raise UsageError(f'clusters must be at least 1; got {self.clusters}')

        # Validate nested specs eagerly so a bad config fails before any work.
        self.kmeans_config()
        self.weight_params()

    @classmethod
    def from_dict(cls, document: dict) -> 'PipelineConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise UsageError(f'unknown configuration keys: {", ".join(unknown)}')

        return cls(**document)

    def to_dict(self) -> dict:
        return asdict(self)

    def kmeans_config(self) -> KMeansConfig:
        return KMeansConfig(
            k=self.k,
            restarts=self.restarts,
            max_iters=self.max_iters,
            tol=self.tol,
            seed=self.seed
        )

    def weight_params(self, threads: int = 1) -> WeightParams:
        return WeightParams(
            kernel=KernelSpec(kind=self.kernel),
            bandwidth=BandwidthRule(
                mode=self.bandwidth,
                rate_exponent=self.rate_exponent,
                fixed_h=self.fixed_h
            ),
            tube=TubeSpec(R=self.radius, grid_points=self.grid_points),
            threads=threads
        )


@dataclass
class ExperimentConfig:
    """
    A bench document: every list is a sweep axis, the report holds the
    cartesian product of them for every seed.
    """

    generators: list = field(default_factory=lambda: ['yinyang'])
    dims: list = field(default_factory=lambda: [2])
    methods: list = field(default_factory=lambda: ['voronoi'])
    linkages: list = field(default_factory=lambda: ['single'])
    clusters: Optional[list] = None
    knots: list = field(default_factory=lambda: ['auto'])
    rate_exponents: list = field(default_factory=lambda: [-1 / 5])
    seeds: Optional[list] = None
    repeats: int = 1
    first_seed: int = 0
    noise_frac: float = 0.0
    denoise_frac: float = 0.0
    noise_sd: float = 0.1
    kernel: str = 'gaussian'
    radius: Union[float, str] = 'auto'
    grid_points: int = 101
    restarts: int = 50
    max_iters: int = 100
    tol: float = 1e-6
    threads: Optional[int] = None
    knot_size_diagrams: bool = False

    def __post_init__(self):
        if not self.methods:
            raise UsageError('an experiment needs at least one method')

        if not self.generators or not self.dims:
            raise UsageError('an experiment needs at least one generator and one dimension')

        for method in self.methods:
            _check_choice('method', method, WEIGHT_KINDS + BASELINE_METHODS)

        for linkage in self.linkages:
            _check_choice('linkage', linkage, LINKAGE_KINDS)

        for rate in self.rate_exponents:
            BandwidthRule(rate_exponent=rate)

        for k in self.knots:
            _parse_auto('k', k, int)

        if self.repeats < 1:
            raise UsageError(f'repeats must be at least 1; got {self.repeats}')

        if not 0 <= self.noise_frac <= 1:
            raise UsageError(f'noise_frac must lie in [0, 1]; got {self.noise_frac}')

        if not 0 <= self.denoise_frac < 1:
            raise UsageError(f'denoise_frac must lie in [0, 1); got {self.denoise_frac}')

        KernelSpec(kind=self.kernel)
        TubeSpec(R=self.radius, grid_points=self.grid_points)

    @classmethod
    def from_dict(cls, document: dict) -> 'ExperimentConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise UsageError(f'unknown experiment keys: {", ".join(unknown)}')

        return cls(**document)

    def to_dict(self) -> dict:
        return asdict(self)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]

        return list(range(self.first_seed, self.first_seed + self.repeats))

    def weight_params(self, rate_exponent: float, threads: int = 1) -> WeightParams:
        return WeightParams(
            kernel=KernelSpec(kind=self.kernel),
            bandwidth=BandwidthRule(rate_exponent=rate_exponent),
            tube=TubeSpec(R=self.radius, grid_points=self.grid_points),
            threads=threads
        )


def to_plain(value):
    """
    Convert numpy scalars and arrays into JSON-friendly builtins

    :param value: any nested structure of dicts, lists, tuples and numpy values
    :return: the same structure using only builtin types
    """

    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]

    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())

    if isinstance(value, np.integer):
        return int(value)

    if isinstance(value, np.floating):
        return float(value)

    return value
