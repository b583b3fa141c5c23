##
# Minutes-scale end-to-end checks. Set DDFSIM_SLOW_TESTS=1 to run them.
##
import itertools
import math
import os
import unittest

import numpy as np
from unittest import TestCase

from ddfsim.ddf.channel import SystemParams, draw_channel
from ddfsim.ddf.decoder import candidate_list, sphere_closest
from ddfsim.ddf.destination import rad_detect, rad_gaussian_block, rad_pairwise_closed_form, rad_pairwise_mc
from ddfsim.ddf.dmt import dmt_finite, dmt_infinite
from ddfsim.ddf.relay import MMSE_GDFE_LATTICE, chernoff_tail_bound, noise_tail_mc
from ddfsim.ddf.simulation import SimConfig, run_sweep

slow = unittest.skipUnless(os.environ.get('DDFSIM_SLOW_TESTS') == '1', 'set DDFSIM_SLOW_TESTS=1')

SNR_GRID = tuple(float(v) for v in range(0, 32, 2))


def desk_config(**changes):
    values = dict(params=SystemParams(M=4, T=1, R=2.0), snr_db=SNR_GRID, min_errors=100, max_trials=200000,
                  outage_trials=100000, threads=os.cpu_count() or 1)
    values.update(changes)
    return SimConfig(**values)


def snr_at(snr_db, values, level=1e-2):
    """SNR at which a falling error curve crosses `level`, interpolated on a log scale."""
    for s0, s1, p0, p1 in zip(snr_db, snr_db[1:], values, values[1:]):
        if p0 >= level > p1:
            high, low, target = math.log10(p0), math.log10(max(p1, 1e-12)), math.log10(level)
            return s0 + (s1 - s0) * (high - target) / (high - low)
    return math.nan


@slow
class TestErrorCurves(TestCase):

    def test_first_slot_rule_is_not_monotone(self):
        stats = run_sweep(desk_config(relay_rule='phi1', tau=None))
        relay_dominated = {i for i, point in enumerate(stats) if point.err_relay > point.err_dest_given_relay_ok}
        self.assertTrue(relay_dominated)
        p_error = [point.p_error for point in stats]
        rising = [i for i in range(len(stats) - 1)
                  if p_error[i + 1] >= p_error[i] > 0 and {i, i + 1} & relay_dominated]
        self.assertTrue(rising, p_error)

    def test_forney_rule_keeps_relay_errors_rare_and_tracks_outage(self):
        stats = run_sweep(desk_config(relay_rule='phiF', tau=None))
        for point in stats:
            if point.err_total:
                self.assertLess(point.p_relay_error, 0.1 * point.p_error, point.snr_db)
            else:
                self.assertEqual(point.err_relay, 0, point.snr_db)
        error_snr = snr_at(SNR_GRID, [point.p_error for point in stats])
        outage_snr = snr_at(SNR_GRID, [point.p_out_mc for point in stats])
        self.assertLessEqual(abs(error_snr - outage_snr), 2.0, (error_snr, outage_snr))

    def test_lattice_decoding_tracks_exhaustive_ml(self):
        ml = run_sweep(desk_config(relay_rule='phiF', tau=None))
        lattice = run_sweep(desk_config(relay_rule='phiF', tau=None, relay_decoder=MMSE_GDFE_LATTICE,
                                        dest_decoder=MMSE_GDFE_LATTICE))
        ml_snr = snr_at(SNR_GRID, [point.p_error for point in ml])
        lattice_snr = snr_at(SNR_GRID, [point.p_error for point in lattice])
        self.assertLessEqual(lattice_snr - ml_snr, 1.5, (ml_snr, lattice_snr))



class TestLatticeSearch(TestCase):

    def setUp(self):
        self.points = {d: np.array(list(itertools.product(range(4), repeat=d))) for d in range(1, 9)}

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(14)
        checked = 0
        while checked < 1000:
            dimension = int(rng.integers(1, 9))
            basis = rng.standard_normal((dimension, dimension)) + 2 * np.eye(dimension)
            if np.linalg.matrix_rank(basis) < dimension:
                continue
            target = basis @ rng.uniform(-0.5, 3.5, dimension)
            points = self.points[dimension]
            distances = np.sum((target - points @ basis.T) ** 2, axis=1)
            order = np.lexsort(points.T[::-1])
            order = order[np.argsort(distances[order], kind='stable')]
            np.testing.assert_array_equal(sphere_closest(basis, target, box=(0, 3)), points[order[0]])
            size = min(16, len(points))
            vectors, found = candidate_list(basis, target, size, box=(0, 3), with_distances=True)
            np.testing.assert_allclose(found, distances[order[:size]], rtol=1e-9, atol=1e-9)
            np.testing.assert_array_equal(vectors, points[order[:size]])
            checked += 1


@slow
class TestRelayActivityFloor(TestCase):

    def average_pairwise(self, rho_db, draws=5000):
        params = SystemParams(M=2, T=1, R=1.0, rho_db=rho_db)
        rng = np.random.default_rng(10)
        return np.mean([rad_pairwise_closed_form(1, 2, draw_channel(params, rng), params) for _ in range(draws)])

    def test_floor_does_not_move_with_snr(self):
        low, high = self.average_pairwise(20.0), self.average_pairwise(40.0)
        self.assertLess(max(low, high) / min(low, high), 2.0)

    def test_closed_form_at_fixed_channels(self):
        params = SystemParams(M=2, T=1, R=1.0, rho_db=10.0)
        rng = np.random.default_rng(11)
        trials = 100000
        for _ in range(5):
            ch = draw_channel(params, rng)
            closed = rad_pairwise_closed_form(1, 2, ch, params)
            empirical = rad_pairwise_mc(1, 2, ch, params, trials, rng)
            self.assertLessEqual(abs(closed - empirical), 3 * math.sqrt(closed * (1 - closed) / trials) + 1e-3)

    def test_long_slots_detect_reliably(self):
        params = SystemParams(M=2, T=64, R=1.0, rho_db=20.0)
        rng = np.random.default_rng(12)
        misses = 0
        for _ in range(2000):
            ch = draw_channel(params, rng)
            m = int(rng.integers(1, 3))
            misses += rad_detect(rad_gaussian_block(m, ch, params, rng), ch, params) != m
        self.assertLess(misses / 2000, 0.05)


class TestQuickAcceptance(TestCase):

    def test_curve_structure(self):
        grid = np.linspace(0.0, 1.0, 101)
        gaps = []
        for M in (2, 5, 10, 20):
            d = np.array([dmt_finite(r, M) for r in grid])
            self.assertAlmostEqual(d[0], 2.0)
            self.assertTrue(np.all(np.diff(d) <= 1e-9))
            gaps.append(np.max(np.array([dmt_infinite(r) for r in grid]) - d))
        self.assertTrue(all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])))

    def test_chernoff_bound(self):
        rng = np.random.default_rng(13)
        for m in (1, 2, 4):
            for delta in (1.0, 2.0, 4.0):
                self.assertLessEqual(noise_tail_mc(m, 1, delta, 20000, rng), chernoff_tail_bound(m, 1, delta))
