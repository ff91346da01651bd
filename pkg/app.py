#!/usr/bin/env python3
"""
Command-line entry point: gen, cluster, eval, bench and denoise.

Exit codes: 0 success, 2 usage error, 3 data error, 4 degenerate geometry.
"""

import argparse
import logging
import os
import sys
from dataclasses import fields
from typing import Optional

import numpy as np

from lib.dataclasses import (
    KERNEL_KINDS,
    LINKAGE_KINDS,
    WEIGHT_KINDS,
    BANDWIDTH_MODES,
    ExperimentConfig,
    GeneratorSpec,
    PipelineConfig
)
from lib.domain import DataMatrix
from lib.errors import SkeletonError, UsageError
from lib.plotting import plot_clusters, plot_dendrogram, plot_knot_sizes
from lib.services import read_json, read_numeric_csv, resolve_threads, write_csv, write_json
from stages.bench.bench_stage import run_experiment, write_report, write_summary
from stages.bench.generators import GENERATORS, MIN_DIMS, generate
from stages.bench.metrics import adjusted_rand_index, knn_density_keep, signal_adjusted_rand_index
from stages.knots.knots_stage import knot_size_histogram
from stages.pipeline.pipeline_stage import SkeletonClustering
from stages.segmentation.segmentation_stage import (
    SENTINEL,
    dendrogram_to_dict,
    dendrogram_to_linkage_matrix
)
from stages.skeleton.skeleton_stage import skeleton_to_dict


logger = logging.getLogger('app')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _auto_or_int(value: str):
    return value if value == 'auto' else int(value)


def _auto_or_float(value: str):
    return value if value == 'auto' else float(value)


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _last_column(path: str, header: bool) -> np.ndarray:
    matrix, _ = read_numeric_csv(path, header=header)
    column = matrix[:, -1]
    if np.any(column != np.round(column)):
        raise UsageError(f'last column of {path} holds non-integer labels')

    return column.astype(np.int64)


# ---------------------------------------- #
# gen
# ---------------------------------------- #
def cmd_gen(args) -> int:
    if args.generator not in GENERATORS:
        raise UsageError(f'unknown generator {args.generator!r}; choose one of {", ".join(GENERATORS)}')

    d = args.dim if args.dim is not None else MIN_DIMS[args.generator]
    ds = generate(GeneratorSpec(args.generator, d, args.noise_sd, args.seed if args.seed is not None else 0))

    rows = (list(x) + [t] for x, t in zip(ds.data.values.tolist(), ds.truth.tolist()))
    write_csv(args.out, rows)

    labels, counts = np.unique(ds.truth, return_counts=True)
    histogram = ' '.join(f'{label}:{count}' for label, count in zip(labels.tolist(), counts.tolist()))
    print(f'n={ds.n} d={ds.d} components {histogram}', file=sys.stderr)

    return 0


# ---------------------------------------- #
# cluster
# ---------------------------------------- #
def _cluster_config(args) -> PipelineConfig:
    document = read_json(args.config) if args.config else {}
    if not isinstance(document, dict):
        raise UsageError(f'{args.config} must hold a JSON object')

    known = {f.name for f in fields(PipelineConfig)}
    overrides = {key: value for key, value in vars(args).items() if key in known and value is not None}
    merged = {**document, **overrides}

    generator = merged.get('generator')
    if generator is not None and 'dim' not in merged:
        if generator not in GENERATORS:
            raise UsageError(f'unknown generator {generator!r}; choose one of {", ".join(GENERATORS)}')
        merged['dim'] = MIN_DIMS[generator]

    return PipelineConfig.from_dict(merged)


def cmd_cluster(args) -> int:
    cfg = _cluster_config(args)
    out_dir = _ensure_dir(cfg.out_dir)
    write_json(os.path.join(out_dir, 'config.json'), cfg.to_dict())

    if cfg.input is not None:
        features, _ = read_numeric_csv(cfg.input, header=cfg.header, label_column=cfg.label_column)
        data = DataMatrix(features)
    else:
        data = generate(GeneratorSpec(cfg.generator, cfg.dim, seed=cfg.seed)).data

    skeleton_document = read_json(cfg.skeleton) if cfg.skeleton else None
    pipeline = SkeletonClustering(data, cfg, threads=resolve_threads(cfg.threads), skeleton_document=skeleton_document)

    knots = pipeline.get_knots()
    graph = pipeline.get_graph()
    dendro = pipeline.get_dendrogram()
    result = pipeline.get_result()

    write_csv(os.path.join(out_dir, 'labels.csv'), enumerate(result.labels.tolist()))
    write_json(os.path.join(out_dir, 'skeleton.json'), skeleton_to_dict(graph))
    write_json(os.path.join(out_dir, 'dendrogram.json'), dendrogram_to_dict(dendro))
    write_csv(os.path.join(out_dir, 'knot_sizes.csv'), knot_size_histogram(knots), header=['knot', 'size'])

    if data.d >= 2:
        plot_clusters(os.path.join(out_dir, 'plot.svg'), data.values, result.labels, graph)

    plot_knot_sizes(os.path.join(out_dir, 'knot_sizes.svg'), knots)
    plot_dendrogram(os.path.join(out_dir, 'dendrogram.svg'), dendrogram_to_linkage_matrix(dendro), SENTINEL)
    logger.info('wrote labels, skeleton, dendrogram and plots to %s', out_dir)

    print(pipeline.get_summary())

    return 0


# ---------------------------------------- #
# eval
# ---------------------------------------- #
def cmd_eval(args) -> int:
    pred = _last_column(args.pred, args.header)
    truth = _last_column(args.truth, args.header)
    if pred.size != truth.size:
        raise UsageError(f'{args.pred} has {pred.size} rows but {args.truth} has {truth.size}')

    score = signal_adjusted_rand_index(truth, pred) if args.signal_only else adjusted_rand_index(truth, pred)
    print(f'{score:.6f}')

    return 0


# ---------------------------------------- #
# bench
# ---------------------------------------- #
def cmd_bench(args) -> int:
    document = read_json(args.experiment)
    if not isinstance(document, dict):
        raise UsageError(f'{args.experiment} must hold a JSON object')

    if args.seed is not None:
        document = {**document, 'first_seed': args.seed, 'seeds': None}

    if args.threads is not None:
        document = {**document, 'threads': args.threads}

    if args.repeats is not None:
        document = {**document, 'repeats': args.repeats, 'seeds': None}

    cfg = ExperimentConfig.from_dict(document)
    out_dir = _ensure_dir(args.out_dir or 'out')
    write_json(os.path.join(out_dir, 'config.json'), cfg.to_dict())

    rows = run_experiment(cfg, out_dir=out_dir)
    write_report(os.path.join(out_dir, 'report.csv'), rows)
    write_summary(os.path.join(out_dir, 'summary.csv'), rows)
    logger.info('wrote %d report row(s) to %s', len(rows), out_dir)
    write_summary(None, rows)

    return 0


# ---------------------------------------- #
# denoise
# ---------------------------------------- #
def cmd_denoise(args) -> int:
    features, labels = read_numeric_csv(args.input, header=args.header, label_column=args.label_column)
    keep = knn_density_keep(DataMatrix(features), args.frac)

    rows = features[keep].tolist()
    if labels is not None:
        rows = [row + [label] for row, label in zip(rows, labels[keep].tolist())]

    write_csv(args.out, rows)
    print(f'kept {keep.size} of {features.shape[0]} rows', file=sys.stderr)

    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='master RNG seed')
    common.add_argument('--threads', type=int, default=None, help='worker threads (default: SKELETON_THREADS or CPU count)')
    common.add_argument('--out-dir', dest='out_dir', default=None, help='output directory')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    common.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')

    parser = argparse.ArgumentParser(prog='app.py', description='Skeleton clustering of point clouds.')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', parents=[common], help='generate a benchmark data set')
    gen.add_argument('generator', help=f'one of {", ".join(GENERATORS)}')
    gen.add_argument('--dim', type=int, default=None, help='ambient dimension')
    gen.add_argument('--noise-sd', dest='noise_sd', type=float, default=0.1, help='sd of padding dimensions')
    gen.add_argument('--out', default=None, help='output CSV (default: stdout)')
    gen.set_defaults(handler=cmd_gen)

    cluster = commands.add_parser('cluster', parents=[common], help='cluster a data set')
    cluster.add_argument('input', nargs='?', default=None, help='numeric CSV file, - for stdin')
    cluster.add_argument('--config', default=None, help='JSON configuration; flags override its values')
    cluster.add_argument('--generator', default=None, help='cluster a generated data set instead of a file')
    cluster.add_argument('--dim', type=int, default=None)
    cluster.add_argument('--header', action='store_const', const=True, default=None, help='skip the first row')
    cluster.add_argument('--label-column', dest='label_column', type=int, default=None,
                         help='column to exclude from the features, -1 for the last')
    cluster.add_argument('--skeleton', default=None, help='re-segment a stored skeleton.json')
    cluster.add_argument('--k', type=_auto_or_int, default=None, help='number of knots or "auto"')
    cluster.add_argument('--weight', choices=WEIGHT_KINDS, default=None)
    cluster.add_argument('--kernel', choices=KERNEL_KINDS, default=None)
    cluster.add_argument('--bandwidth', choices=BANDWIDTH_MODES, default=None)
    cluster.add_argument('--rate-exponent', dest='rate_exponent', type=float, default=None)
    cluster.add_argument('--fixed-h', dest='fixed_h', type=float, default=None)
    cluster.add_argument('--radius', type=_auto_or_float, default=None, help='tube radius or "auto"')
    cluster.add_argument('--grid-points', dest='grid_points', type=int, default=None)
    cluster.add_argument('--linkage', choices=LINKAGE_KINDS, default=None)
    cluster.add_argument('--clusters', type=int, default=None, help='final number of clusters S')
    cluster.add_argument('--restarts', type=int, default=None)
    cluster.add_argument('--max-iters', dest='max_iters', type=int, default=None)
    cluster.add_argument('--tol', type=float, default=None)
    cluster.set_defaults(handler=cmd_cluster)

    evaluate = commands.add_parser('eval', parents=[common], help='adjusted Rand index of two label files')
    evaluate.add_argument('pred', help='CSV whose last column holds predicted labels')
    evaluate.add_argument('truth', help='CSV whose last column holds true labels')
    evaluate.add_argument('--header', action='store_true', help='both files have a header row')
    evaluate.add_argument('--signal-only', dest='signal_only', action='store_true',
                          help='ignore rows whose true label is -1')
    evaluate.set_defaults(handler=cmd_eval)

    bench = commands.add_parser('bench', parents=[common], help='run an experiment document')
    bench.add_argument('experiment', help='experiment JSON file')
    bench.add_argument('--repeats', type=int, default=None)
    bench.set_defaults(handler=cmd_bench)

    denoise = commands.add_parser('denoise', parents=[common], help='drop the lowest-density observations')
    denoise.add_argument('input', help='numeric CSV file, - for stdin')
    denoise.add_argument('--frac', type=float, default=0.1, help='fraction to drop')
    denoise.add_argument('--header', action='store_true')
    denoise.add_argument('--label-column', dest='label_column', type=int, default=None,
                         help='column carried through but not used for density; written last')
    denoise.add_argument('--out', default=None, help='output CSV (default: stdout)')
    denoise.set_defaults(handler=cmd_denoise)

    return parser


class StderrHandler(logging.StreamHandler):
    """
    Stream handler bound to whatever sys.stderr is when a record is emitted
    """

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=[StderrHandler()], force=True)


def exit_code_for(error: SkeletonError) -> int:
    print(f'error: {error}', file=sys.stderr)
    return error.exit_code


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    _configure_logging(args)

    try:
        return args.handler(args)
    except SkeletonError as e:
        return exit_code_for(e)


if __name__ == '__main__':
    sys.exit(main())
