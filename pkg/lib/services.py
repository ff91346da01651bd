"""
Shared services: distance primitives, nearest-knot search and file I/O.

References:
  - SciPy Doc:
        - scipy.spatial.cKDTree: https://docs.scipy.org/doc/scipy/reference/generated/scipy.spatial.cKDTree.html
  - Python Doc:
        - csv: https://docs.python.org/3/library/csv.html
"""

import csv
import json
import logging
import os
import sys
from typing import Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from lib.dataclasses import to_plain
from lib.domain import DataMatrix
from lib.errors import IngestionError, UsageError


logger = logging.getLogger(__name__)

# Above this dimension a k-d tree prunes almost nothing, a blocked scan wins.
KDTREE_MAX_DIM = 20

# Upper bound on the number of float64 entries held by one scan block.
SCAN_BLOCK_ELEMENTS = 1 << 22

# Relative gap under which two candidate distances are re-ranked exactly.
TIE_RTOL = 1e-9


def _as_array(points: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(points, DataMatrix):
        return points.values

    return np.atleast_2d(np.asarray(points, dtype=np.float64))


def euclidean_dist(a, b) -> float:
    """
    Euclidean distance between two vectors

    :param a: d-vector
    :param b: d-vector
    :return: ||a - b||
    """

    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise UsageError(f'dimension mismatch: {a.shape[0]} vs {b.shape[0]}')

    diff = a - b

    return float(np.sqrt(np.dot(diff, diff)))


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """
    Squared distances from every point to every center, by direct differences

    :param points: n x d array
    :param centers: k x d array
    :return: n x k array
    """

    n, k = points.shape[0], centers.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    rows = max(1, SCAN_BLOCK_ELEMENTS // max(1, k * points.shape[1]))

    for start in range(0, n, rows):
        diff = points[start:start + rows, None, :] - centers[None, :, :]
        out[start:start + rows] = np.einsum('ijk,ijk->ij', diff, diff)

    return out


def _two_nearest_scan(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, k = points.shape[0], centers.shape[0]
    assign = np.empty((n, 2), dtype=np.int64)
    rows = max(1, SCAN_BLOCK_ELEMENTS // max(1, k * points.shape[1]))

    for start in range(0, n, rows):
        block = squared_distances(points[start:start + rows], centers)
        # stable sort keeps the lower knot index first among equal distances
        assign[start:start + rows] = np.argsort(block, axis=1, kind='stable')[:, :2]

    return assign[:, 0], assign[:, 1]


def _two_nearest_kdtree(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = centers.shape[0]
    depth = min(3, k)
    dist, idx = cKDTree(centers).query(points, k=depth)

    suspect = np.isclose(dist[:, 0], dist[:, 1], rtol=TIE_RTOL, atol=0.0)
    if depth == 3:
        suspect |= np.isclose(dist[:, 1], dist[:, 2], rtol=TIE_RTOL, atol=0.0)

    assign1 = idx[:, 0].astype(np.int64)
    assign2 = idx[:, 1].astype(np.int64)

    if np.any(suspect):
        rows = np.flatnonzero(suspect)
        a1, a2 = _two_nearest_scan(points[rows], centers)
        assign1[rows] = a1
        assign2[rows] = a2

    return assign1, assign2


def two_nearest_knots(points: Union[DataMatrix, np.ndarray],
                      centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Indices of the nearest and second-nearest knot of every point, ties to the lower index

    :param points: DataMatrix or n x d array
    :param centers: k x d knot coordinates, k >= 2
    :return: (assign1, assign2)
    """

    points = _as_array(points)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))

    if centers.shape[0] < 2:
        raise UsageError(f'two nearest knots need at least 2 knots; got {centers.shape[0]}')

    if centers.shape[1] != points.shape[1]:
        raise UsageError(f'dimension mismatch: points have d={points.shape[1]}, knots d={centers.shape[1]}')

    if points.shape[1] <= KDTREE_MAX_DIM:
        return _two_nearest_kdtree(points, centers)

    return _two_nearest_scan(points, centers)


def knn_radius(points: Union[DataMatrix, np.ndarray], kth: int) -> np.ndarray:
    """
    Distance from every point to its kth nearest other point

    :param points: DataMatrix or n x d array
    :param kth: neighbour rank, 1 <= kth < n
    :return: length-n distances
    """

    points = _as_array(points)
    n = points.shape[0]
    if not 1 <= kth < n:
        raise UsageError(f'kth must lie in [1, {n - 1}]; got {kth}')

    if points.shape[1] <= KDTREE_MAX_DIM:
        dist, _ = cKDTree(points).query(points, k=kth + 1)
        return dist[:, kth]

    out = np.empty(n, dtype=np.float64)
    rows = max(1, SCAN_BLOCK_ELEMENTS // max(1, n * points.shape[1]))

    for start in range(0, n, rows):
        block = squared_distances(points[start:start + rows], points)
        out[start:start + rows] = np.partition(block, kth, axis=1)[:, kth]

    return np.sqrt(out)


def resolve_threads(explicit: Optional[int] = None) -> int:
    """
    Worker count: explicit value, then SKELETON_THREADS, then the CPU count

    :param explicit: value given on the command line or in a config
    :return: a positive thread count
    """

    if explicit is not None:
        threads = int(explicit)
    elif os.environ.get('SKELETON_THREADS'):
        try:
            threads = int(os.environ['SKELETON_THREADS'])
        except ValueError:
            raise UsageError(f'SKELETON_THREADS must be an integer; got {os.environ["SKELETON_THREADS"]!r}')
    else:
        threads = os.cpu_count() or 1

    if threads < 1:
        raise UsageError(f'thread count must be positive; got {threads}')

    return threads


def read_numeric_csv(path: str, header: bool = False,
                     label_column: Optional[int] = None) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Read a rectangular numeric CSV file

    :param path: file path, or '-' for stdin
    :param header: skip the first row
    :param label_column: column holding integer labels to split off, negative counts from the end
    :return: (n x d feature array, labels or None)
    """

    try:
        handle = sys.stdin if path == '-' else open(path, newline='')
    except OSError as e:
        raise IngestionError(f'cannot open {path}: {e.strerror}')

    rows = []
    width = None
    with handle:
        for row_no, row in enumerate(csv.reader(handle), start=1):
            if header and row_no == 1:
                continue

            if not row or all(not cell.strip() for cell in row):
                continue

            if width is None:
                width = len(row)
            elif len(row) != width:
                raise IngestionError(f'expected {width} columns, found {len(row)}', row=row_no, col=len(row))

            values = []
            for col_no, cell in enumerate(row, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(f'non-numeric cell {cell.strip()!r}', row=row_no, col=col_no)

                if not np.isfinite(value):
                    raise IngestionError(f'non-finite cell {cell.strip()!r}', row=row_no, col=col_no)

                values.append(value)

            rows.append(values)

    if not rows:
        raise IngestionError(f'{path} holds no data rows')

    matrix = np.array(rows, dtype=np.float64)
    if label_column is None:
        return matrix, None

    col = label_column % matrix.shape[1]
    labels = matrix[:, col]
    if np.any(labels != np.round(labels)):
        raise IngestionError(f'label column {col + 1} holds non-integer values')

    features = np.delete(matrix, col, axis=1)
    if features.shape[1] == 0:
        raise IngestionError('no feature columns left after removing the label column')

    return features, labels.astype(np.int64)


def write_csv(path: Optional[str], rows, header: Optional[list] = None) -> None:
    """
    Write rows as CSV; floats keep their shortest round-trip repr

    :param path: output file, None or '-' for stdout
    :param rows: iterable of sequences
    :param header: optional first row
    """

    handle = sys.stdout if path in (None, '-') else open(path, 'w', newline='')
    try:
        writer = csv.writer(handle, lineterminator='\n')
        if header is not None:
            writer.writerow(header)

        for row in rows:
            writer.writerow(to_plain(list(row)))
    finally:
        if handle is not sys.stdout:
            handle.close()


def write_json(path: str, document: dict) -> None:
    with open(path, 'w') as f:
        json.dump(to_plain(document), f, indent=2, sort_keys=True)
        f.write('\n')


def read_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise IngestionError(f'cannot open {path}: {e.strerror}')
    except json.JSONDecodeError as e:
        raise IngestionError(f'{path} is not valid JSON: {e.msg}', row=e.lineno, col=e.colno)
