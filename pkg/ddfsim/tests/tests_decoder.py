import itertools

import numpy as np
from unittest import TestCase

from ddfsim.ddf.decoder import (_next_child, _start_children, candidate_list, check_basis, mmse_gdfe_filters,
                                sphere_closest)
from ddfsim.exceptions import RankDeficientError, SearchFailure


def exhaustive(basis, target, lower, upper):
    """Every box point with its squared distance, nearest first, ties lexicographic."""
    points = list(itertools.product(range(lower, upper + 1), repeat=basis.shape[1]))
    scored = [(float(np.sum((target - basis @ np.array(p)) ** 2)), p) for p in points]
    return sorted(scored)


def children(center, lower, upper, count=None):
    """Order in which the search tries the integers of a one-level tree."""
    lower, upper = np.array([lower], dtype=np.int64), np.array([upper], dtype=np.int64)
    centers, below, above = np.zeros(1), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)
    _start_children(0, np.eye(1), np.array([float(center)]), np.zeros(1, dtype=np.int64), lower, upper, centers,
                    below, above)
    order = []
    while count is None or len(order) < count:
        found, value = _next_child(0, centers[0], lower, upper, below, above)
        if not found:
            break
        order.append(int(value))
    return order


class TestChildOrder(TestCase):

    def test_order(self):
        self.assertEqual(children(0.3, -10, 10, 5), [0, 1, -1, 2, -2])
        self.assertEqual(children(-0.7, -10, 10, 4), [-1, 0, -2, 1])

    def test_tie_goes_to_the_smaller_integer(self):
        self.assertEqual(children(0.5, -10, 10, 4), [0, 1, -1, 2])

    def test_box(self):
        self.assertEqual(children(5.2, 0, 3), [3, 2, 1, 0])
        self.assertEqual(children(1.6, 0, 3), [2, 1, 3, 0])
        self.assertEqual(children(-4.0, 0, 3), [0, 1, 2, 3])


class TestSphereClosest(TestCase):

    def test_zero_residual(self):
        basis = np.array([[2.0, 0.5, 0.1], [0.0, 1.5, -0.3], [0.3, 0.0, 1.0]])
        z = np.array([1, -2, 3])
        np.testing.assert_array_equal(sphere_closest(basis, basis @ z), z)
        np.testing.assert_array_equal(sphere_closest(basis, basis @ z, box=(-3, 3)), z)

    def test_rounding_region(self):
        z = np.array([2, 0, -1, 1])
        for j in range(4):
            target = z + 0.49 * np.eye(4)[j]
            np.testing.assert_array_equal(sphere_closest(np.eye(4), target), z)

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            dimension = int(rng.integers(1, 5))
            basis = rng.standard_normal((dimension, dimension)) + 2 * np.eye(dimension)
            if np.linalg.matrix_rank(basis) < dimension:
                continue
            target = basis @ rng.uniform(-0.5, 3.5, dimension)
            expected = exhaustive(basis, target, 0, 3)[0][1]
            np.testing.assert_array_equal(sphere_closest(basis, target, box=(0, 3)), expected)

    def test_box_per_coordinate(self):
        rng = np.random.default_rng(19)
        basis = rng.standard_normal((3, 3)) + 2 * np.eye(3)
        box = np.array([[0, 1], [-1, 2], [3, 3]])
        for _ in range(20):
            target = basis @ rng.uniform(-2, 4, 3)
            points = itertools.product(*(range(lo, up + 1) for lo, up in box))
            expected = min(points, key=lambda p: (float(np.sum((target - basis @ np.array(p)) ** 2)), p))
            np.testing.assert_array_equal(sphere_closest(basis, target, box=box), expected)

    def test_empty_box(self):
        with self.assertRaises(ValueError):
            sphere_closest(np.eye(2), [0.0, 0.0], box=[[0, 1], [2, 1]])

    def test_tall_basis(self):
        basis = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(sphere_closest(basis, [1.2, -0.8, 5.0]), [1, -1])

    def test_tie_is_lexicographic(self):
        np.testing.assert_array_equal(sphere_closest(np.eye(2), [0.5, 0.5]), [0, 0])
        np.testing.assert_array_equal(sphere_closest(np.eye(1), [-1.5]), [-2])

    def test_rank_deficient(self):
        with self.assertRaises(RankDeficientError):
            sphere_closest([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0])
        with self.assertRaises(RankDeficientError):
            check_basis([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def test_node_limit(self):
        with self.assertRaises(SearchFailure) as caught:
            sphere_closest(np.eye(6), np.full(6, 0.5), node_limit=3)
        self.assertEqual(caught.exception.limit, 3)


class TestCandidateList(TestCase):

    def setUp(self):
        rng = np.random.default_rng(23)
        self.basis = rng.standard_normal((4, 4)) + 2 * np.eye(4)
        self.target = self.basis @ rng.uniform(0, 3, 4)

    def test_single_candidate(self):
        first = candidate_list(self.basis, self.target, 1)[0]
        np.testing.assert_array_equal(first, sphere_closest(self.basis, self.target))

    def test_matches_sorted_enumeration(self):
        vectors, distances = candidate_list(self.basis, self.target, 16, box=(0, 3), with_distances=True)
        expected = exhaustive(self.basis, self.target, 0, 3)[:16]
        np.testing.assert_allclose(distances, [d for d, _ in expected], rtol=1e-9)
        self.assertEqual([tuple(v) for v in vectors], [p for _, p in expected])

    def test_nondecreasing(self):
        _, distances = candidate_list(self.basis, self.target, 40, with_distances=True)
        self.assertTrue(np.all(np.diff(distances) >= 0))

    def test_distance_includes_the_part_outside_the_span(self):
        basis = np.array([[1.0], [0.0]])
        vectors, distances = candidate_list(basis, [0.2, 2.0], 2, with_distances=True)
        self.assertEqual([int(v[0]) for v in vectors], [0, 1])
        np.testing.assert_allclose(distances, [4.04, 4.64])

    def test_too_few_points(self):
        with self.assertRaises(SearchFailure):
            candidate_list(np.eye(1), [0.0], 3, box=(0, 1))


class TestMmseGdfe(TestCase):

    def test_identity(self):
        filters = mmse_gdfe_filters(np.eye(2), 1.0)
        np.testing.assert_allclose(filters.backward, np.sqrt(2) * np.eye(2))
        np.testing.assert_allclose(filters.forward, np.eye(2) / np.sqrt(2))

    def test_regularised_gram(self):
        rng = np.random.default_rng(4)
        H = rng.standard_normal((6, 4))
        H[2] = 0
        filters = mmse_gdfe_filters(H, 10.0)
        B = filters.backward
        np.testing.assert_allclose(B.T @ B - H.T @ H, np.eye(4) / 10.0, atol=1e-9)
        np.testing.assert_allclose(np.tril(B, -1), 0)
        np.testing.assert_allclose(B.T @ filters.forward, H.T, atol=1e-9)

    def test_high_snr_limit(self):
        rng = np.random.default_rng(8)
        H = rng.standard_normal((4, 4)) + 3 * np.eye(4)
        filters = mmse_gdfe_filters(H, 1e9)
        np.testing.assert_allclose(filters.forward @ H, filters.backward, rtol=1e-3, atol=1e-6)

    def test_underdetermined_model_is_full_rank(self):
        rng = np.random.default_rng(6)
        filters = mmse_gdfe_filters(rng.standard_normal((4, 8)), 10.0)
        self.assertEqual(np.linalg.matrix_rank(filters.backward), 8)

    def test_non_finite(self):
        with self.assertRaises(RankDeficientError):
            mmse_gdfe_filters(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1.0)
        with self.assertRaises(ValueError):
            mmse_gdfe_filters(np.eye(2), 0.0)
