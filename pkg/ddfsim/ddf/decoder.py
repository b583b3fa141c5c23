##
# Lattice decoding, depth-first Schnorr-Euchner enumeration for the closest
# point and for the N closest points, and MMSE-GDFE preprocessing.
##
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from numba import njit

from ddfsim import settings
from ddfsim.exceptions import RankDeficientError, SearchFailure

logger = logging.getLogger(__name__)

# Relative slack when comparing squared distances
DISTANCE_TOLERANCE = 1e-9

UNBOUNDED = 1 << 62


@njit(cache=True)
def _start_children(level, r, center, z, lower, upper, centers, below, above):
    """Center of `level` given the coordinates above it; the nearest box integer is tried first."""
    total = center[level]
    for k in range(level + 1, r.shape[0]):
        total -= r[level, k] * z[k]
    c = total / r[level, level]
    centers[level] = c
    nearest = np.floor(c + 0.5)
    if c - np.floor(c) == 0.5:
        nearest = np.floor(c)
    nearest = min(max(nearest, float(lower[level])), float(upper[level]))
    below[level] = int(nearest)
    above[level] = int(nearest) + 1


@njit(cache=True)
def _next_child(level, c, lower, upper, below, above):
    """
    Next integer of `level` in order of distance to its center, inside the
    box. Of two equidistant integers the smaller comes first.
    """
    down = below[level]
    up = above[level]
    take_down = down >= lower[level]
    take_up = up <= upper[level]
    if take_down and take_up:
        take_down = abs(c - down) <= abs(up - c)
    if take_down:
        below[level] = down - 1
        return True, down
    if take_up:
        above[level] = up + 1
        return True, up
    return False, 0


@njit(cache=True)
def _lex_less(a, b):
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def _insert(points, distances, count, z, distance):
    """Sorted insert by (distance, point), dropping whatever falls past the end."""
    size = distances.shape[0]
    position = count
    while position > 0 and (distance < distances[position - 1] or
                            (distance == distances[position - 1] and _lex_less(z, points[position - 1]))):
        position -= 1
    if position >= size:
        return count
    for i in range(min(count, size - 1), position, -1):
        points[i, :] = points[i - 1, :]
        distances[i] = distances[i - 1]
    points[position, :] = z
    distances[position] = distance
    return min(count + 1, size)


##
# Enumerate every leaf within the current radius, shrinking the radius as
# better points come in. `closest` keeps one point with tolerant lexicographic
# tie-breaking; otherwise the `size` best by (distance, point) are kept.
# Returns (points, distances, count, visited, over_limit).
##
@njit(cache=True)
def _search(r, center, lower, upper, size, closest, node_limit):
    dimension = r.shape[0]
    points = np.zeros((size, dimension), dtype=np.int64)
    distances = np.full(size, np.inf)
    count = 0
    radius = np.inf
    z = np.zeros(dimension, dtype=np.int64)
    centers = np.zeros(dimension)
    partial = np.zeros(dimension + 1)
    below = np.zeros(dimension, dtype=np.int64)
    above = np.zeros(dimension, dtype=np.int64)
    visited = 0
    level = dimension - 1
    _start_children(level, r, center, z, lower, upper, centers, below, above)
    while level < dimension:
        found, value = _next_child(level, centers[level], lower, upper, below, above)
        if not found:
            level += 1
            continue
        visited += 1
        if visited > node_limit:
            return points, distances, count, visited, True
        distance = partial[level + 1] + (r[level, level] * (value - centers[level])) ** 2
        if distance > radius + DISTANCE_TOLERANCE * max(1.0, radius):
            level += 1
            continue
        z[level] = value
        if level > 0:
            partial[level] = distance
            level -= 1
            _start_children(level, r, center, z, lower, upper, centers, below, above)
        elif closest:
            slack = DISTANCE_TOLERANCE * max(1.0, distances[0])
            if count == 0 or distance < distances[0] - slack:
                distances[0] = distance
                points[0, :] = z
                count = 1
            elif abs(distance - distances[0]) <= slack and _lex_less(z, points[0]):
                distances[0] = min(distance, distances[0])
                points[0, :] = z
            radius = distances[0]
        else:
            count = _insert(points, distances, count, z, distance)
            if count == size:
                radius = distances[size - 1]
    return points, distances, count, visited, False


def _normalize_box(box, dimension):
    if box is None:
        return np.full(dimension, -UNBOUNDED, dtype=np.int64), np.full(dimension, UNBOUNDED, dtype=np.int64)
    box = np.asarray(box)
    if box.shape == (2,):
        box = np.tile(box, (dimension, 1))
    if box.shape != (dimension, 2):
        raise ValueError('box must be a (lower, upper) pair or one pair per coordinate')
    lower = np.ascontiguousarray(box[:, 0], dtype=np.int64)
    upper = np.ascontiguousarray(box[:, 1], dtype=np.int64)
    if np.any(lower > upper):
        raise ValueError('empty search box')
    return lower, upper


def check_basis(basis) -> np.ndarray:
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or not np.all(np.isfinite(basis)):
        raise RankDeficientError('lattice basis must be a finite 2-d matrix')
    rows, cols = basis.shape
    if rows < cols or np.linalg.matrix_rank(basis) < cols:
        raise RankDeficientError('lattice basis of shape %s is rank deficient' % (basis.shape,))
    return basis


def _run_search(basis, target, box, size, closest, node_limit):
    basis = check_basis(basis)
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.size != basis.shape[0]:
        raise ValueError('target has %d entries, basis has %d rows' % (target.size, basis.shape[0]))
    q, r = np.linalg.qr(basis)
    center = q.T @ target
    # Part of the target outside the lattice span; the same for every point
    offset = max(0.0, float(target @ target - center @ center))
    lower, upper = _normalize_box(box, basis.shape[1])
    points, distances, count, visited, over_limit = _search(np.ascontiguousarray(r), np.ascontiguousarray(center),
                                                            lower, upper, size, closest, node_limit)
    if over_limit:
        raise SearchFailure(int(visited), node_limit)
    return points[:count], distances[:count] + offset, int(visited)


def sphere_closest(basis, target, box=None, node_limit: int = settings.DDF_SEARCH_NODE_LIMIT) -> np.ndarray:
    """
    Integer vector z minimising |target - basis z|^2, optionally inside `box`.
    Equal distances (within a relative 1e-9) go to the lexicographically
    smallest z.

    :param basis: real generator matrix, full column rank
    :param target: real vector with one entry per basis row
    :param box: None, a (lower, upper) pair or one pair per coordinate
    :param node_limit: enumeration budget, SearchFailure past it
    """
    points, _, visited = _run_search(basis, target, box, 1, True, node_limit)
    if not len(points):
        raise SearchFailure(visited, node_limit, 'no lattice point inside the search box')
    logger.debug('closest point after %d nodes', visited)
    return points[0].copy()


def candidate_list(basis, target, size: int, box=None, node_limit: int = settings.DDF_SEARCH_NODE_LIMIT,
                   with_distances: bool = False):
    """
    The `size` lattice points closest to `target`, nearest first.
    Returns a list of integer vectors, or (vectors, squared distances).
    """
    if size < 1:
        raise ValueError('candidate list size must be positive')
    points, distances, visited = _run_search(basis, target, box, int(size), False, node_limit)
    if len(points) < size:
        raise SearchFailure(visited, node_limit,
                            'only %d lattice points inside the search box, %d requested' % (len(points), size))
    vectors = [point.copy() for point in points]
    if with_distances:
        return vectors, distances
    return vectors


@dataclass(frozen=True, eq=False)
class GdfeFilters:
    forward: np.ndarray
    backward: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Real model y = H x + noise; snr is symbol energy over noise variance per complex dimension."""
    H: np.ndarray
    snr: float
    y: np.ndarray


@dataclass(frozen=True, eq=False)
class LatticeSearch:
    point: np.ndarray
    observation: np.ndarray
    filters: GdfeFilters
    basis: np.ndarray
    box: Optional[np.ndarray] = None


def mmse_gdfe_filters(H, snr: float) -> GdfeFilters:
    """
    Forward filter F and upper-triangular feedback B with
    B^T B = H^T H + I / snr and F = B^-T H^T.
    """
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        raise RankDeficientError('channel matrix has non-finite entries')
    if not snr > 0 or not math.isfinite(snr):
        raise ValueError('snr must be positive and finite (got %r)' % (snr,))
    gram = H.T @ H + np.eye(H.shape[1]) / snr
    try:
        backward = scipy.linalg.cholesky(gram, lower=False)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError('MMSE Gram matrix is not positive definite: %s' % exc)
    forward = scipy.linalg.solve_triangular(backward, H.T, trans='T', lower=False)
    if not (np.all(np.isfinite(forward)) and np.all(np.isfinite(backward))):
        raise RankDeficientError('MMSE-GDFE filters are not finite')
    return GdfeFilters(forward, backward)


def mmse_gdfe_search(model: LinearModel, codebook, dither: Optional[np.ndarray] = None,
                     node_limit: int = settings.DDF_SEARCH_NODE_LIMIT) -> LatticeSearch:
    """
    Filter the observation, add back the dither through B and run the
    closest-point search on the lattice generated by B times the codebook
    basis. A shaped codebook limits the search to its own coefficient box,
    so the decision is always a codeword; otherwise the search runs over the
    whole lattice and the coset is read off the point found.
    """
    filters = mmse_gdfe_filters(model.H, model.snr)
    if dither is None:
        dither = codebook.dither
    observation = filters.forward @ np.asarray(model.y, dtype=float) + filters.backward @ dither
    basis = filters.backward @ codebook.basis
    box = codebook.coefficient_box(dither)
    point = sphere_closest(basis, observation, box=box, node_limit=node_limit)
    return LatticeSearch(point, observation, filters, basis, box)


def lattice_decode_mmse(model: LinearModel, codebook, dither: Optional[np.ndarray] = None,
                        node_limit: int = settings.DDF_SEARCH_NODE_LIMIT) -> int:
    search = mmse_gdfe_search(model, codebook, dither, node_limit)
    return codebook.coset_of(search.point)
