import math
from dataclasses import replace

import numpy as np
from unittest import TestCase

from ddfsim.ddf.channel import SystemParams
from ddfsim.ddf.lattice import CosetCodebook, RotatedQamCodebook
from ddfsim.ddf.relay import MMSE_GDFE_LATTICE
from ddfsim.ddf.simulation import (CSV_COLUMNS, UDM_PERMUTATION, ErrorStats, SimConfig, TrialOutcome, _Runner,
                                   build_codebook, calibrate_tau, run_point, run_sweep, run_trial, substream,
                                   sweep_metadata, sweep_rows)
from ddfsim.ddf.udm import UdmCodebook
from ddfsim.exceptions import ValidationError


def small_config(**changes):
    cfg = SimConfig(params=SystemParams(M=2, T=1, R=2.0, seed=99), tau=(0.0,), snr_db=(10.0,), min_errors=5,
                    max_trials=60, batch_size=16, outage_trials=2000, calibration_trials=40,
                    tau_grid=(0.01, 1.0, 1e8))
    return replace(cfg, **changes)


class TestStreams(TestCase):

    def test_substream_is_keyed(self):
        first = substream(5, 0, 1, 2).standard_normal(4)
        np.testing.assert_array_equal(first, substream(5, 0, 1, 2).standard_normal(4))
        self.assertFalse(np.array_equal(first, substream(5, 0, 1, 3).standard_normal(4)))
        self.assertFalse(np.array_equal(first, substream(6, 0, 1, 2).standard_normal(4)))

    def test_trial_is_reproducible(self):
        cfg = small_config()
        self.assertEqual(run_trial(cfg, 17), run_trial(cfg, 17))
        self.assertEqual(run_trial(cfg, 17, seed=99), run_trial(cfg, 17))


class TestCodebooks(TestCase):

    def test_families(self):
        self.assertIsInstance(build_codebook('rotated-qam', 2, (4, 2, 4), False, 4, 10.0), RotatedQamCodebook)
        self.assertIsInstance(build_codebook('rotated-qam', 2, (4, 2, 4), True, 4, 10.0), CosetCodebook)
        self.assertIsInstance(build_codebook(UDM_PERMUTATION, 2, (4, 2, 4), False, 4, 10.0), UdmCodebook)
        self.assertFalse(build_codebook('rotated-qam', 2, (4, 2, 4), True, 4, 10.0, False).shaped)

    def test_lattice_box_reaches_the_codebook(self):
        cfg = small_config(relay_decoder=MMSE_GDFE_LATTICE, dest_decoder='glrt', lattice_box=False)
        self.assertFalse(cfg.codebook(cfg.params_at(0)).shaped)
        self.assertTrue(replace(cfg, lattice_box=True).codebook(cfg.params_at(0)).shaped)

    def test_cached(self):
        cfg = small_config()
        params = cfg.params_at(0)
        self.assertIs(cfg.codebook(params), cfg.codebook(params))


class TestSimConfig(TestCase):

    def test_unknown_names_are_rejected(self):
        for changes in (dict(dest_decoder='glrt-lattice'), dict(relay_decoder='sphere'), dict(relay_rule='phi4'),
                        dict(code_family='turbo')):
            with self.assertRaises(ValidationError):
                small_config(**changes)

    def test_every_problem_is_reported(self):
        with self.assertRaises(ValidationError) as caught:
            SimConfig(dest_decoder='ml', relay_decoder='ml')
        self.assertEqual(len(caught.exception.messages), 2)


class TestErrorStats(TestCase):

    def test_counters(self):
        stats = ErrorStats(10.0, 3)
        stats.add(TrialOutcome(1, relay_error=True, dest_error=True, relay_silent=False))
        stats.add(TrialOutcome(3, relay_error=False, dest_error=True, relay_silent=True))
        stats.add(TrialOutcome(2, relay_error=False, dest_error=False, relay_silent=False, decoder_failure=True))
        self.assertEqual(stats.trials, 3)
        self.assertEqual(stats.err_total, stats.err_joint + stats.err_dest_given_relay_ok)
        self.assertEqual((stats.err_relay, stats.relay_silent_count, stats.decoder_failures), (1, 1, 1))
        self.assertEqual(stats.histogram, [1, 1, 1])
        self.assertAlmostEqual(stats.p_error, 2 / 3)

    def test_merge(self):
        a, b = ErrorStats(0.0, 2), ErrorStats(0.0, 2)
        a.add(TrialOutcome(1, False, True, False))
        b.add(TrialOutcome(2, True, True, True))
        merged = a.merge(b)
        self.assertEqual((merged.trials, merged.err_total, merged.err_joint), (2, 2, 1))
        self.assertEqual(merged.histogram, [1, 1])
        self.assertEqual(a.histogram, [1, 0])

    def test_csv_row(self):
        self.assertEqual(len(ErrorStats(0.0, 2).csv_row()), len(CSV_COLUMNS))
        self.assertTrue(math.isnan(ErrorStats(0.0, 2).p_error))


class TestPipeline(TestCase):

    def test_noiseless_chain_is_error_free(self):
        for cfg in (small_config(noiseless=True, max_trials=100),
                    small_config(noiseless=True, max_trials=40, code_family=UDM_PERMUTATION, udm=(4, 2, 4),
                                 params=SystemParams(M=4, T=1, R=2.0, seed=3))):
            stats = run_point(cfg, 0, 0.0)
            self.assertEqual(stats.trials, cfg.max_trials)
            self.assertEqual((stats.err_total, stats.err_relay), (0, 0))

    def test_stops_at_min_errors(self):
        cfg = small_config(snr_db=(-10.0,), relay_rule='genie')
        stats = run_point(cfg, 0, math.nan)
        self.assertEqual(stats.err_total, cfg.min_errors)
        self.assertLess(stats.trials, cfg.max_trials)

    def test_batch_size_does_not_matter(self):
        cfg = small_config(snr_db=(0.0,))
        first = run_point(cfg, 0, 1.0)
        second = run_point(replace(cfg, batch_size=5), 0, 1.0)
        self.assertEqual(first.csv_row(), second.csv_row())
        self.assertEqual(first.histogram, second.histogram)

    def test_worker_pool_matches_serial(self):
        cfg = small_config(snr_db=(0.0,), max_trials=24)
        with _Runner(2) as runner:
            pooled = run_point(cfg, 0, 1.0, runner)
        self.assertEqual(pooled.csv_row(), run_point(cfg, 0, 1.0).csv_row())

    def test_decoder_variants_run(self):
        variants = (
            dict(relay_rule='phi2', dest_decoder='glrt'),
            dict(relay_rule='bounded-distance', dest_decoder='rad-then-ml'),
            dict(relay_decoder=MMSE_GDFE_LATTICE, dest_decoder='glrt'),
            dict(relay_decoder=MMSE_GDFE_LATTICE, dest_decoder=MMSE_GDFE_LATTICE, relay_rule='phi1'),
        )
        for changes in variants:
            cfg = small_config(**changes)
            outcome = run_trial(cfg, 3)
            self.assertIsInstance(outcome, TrialOutcome)
            self.assertTrue(1 <= outcome.decision_time <= 2)
            self.assertEqual(outcome, run_trial(cfg, 3))


class TestCalibrationAndSweep(TestCase):

    def test_calibrated_threshold_is_on_the_grid(self):
        cfg = small_config()
        tau = calibrate_tau(cfg, 6.0)
        self.assertIn(tau, cfg.tau_grid)
        self.assertEqual(tau, calibrate_tau(cfg, 6.0))

    def test_threshold_does_not_grow_with_the_target_fraction(self):
        cfg = small_config()
        taus = [calibrate_tau(cfg, 6.0, target_fraction=fraction) for fraction in (0.05, 0.2, 0.5, 1.0)]
        self.assertTrue(all(b <= a for a, b in zip(taus, taus[1:])), taus)

    def test_error_free_relay_takes_the_smallest_threshold(self):
        cfg = small_config(noiseless=True)
        self.assertEqual(calibrate_tau(cfg, 6.0, target_fraction=1.0), min(cfg.tau_grid))

    def test_sweep(self):
        cfg = small_config(snr_db=(0.0, 10.0), tau=None, max_trials=30)
        stats = run_sweep(cfg)
        self.assertEqual([point.snr_db for point in stats], [0.0, 10.0])
        for point in stats:
            self.assertIn(point.tau, cfg.tau_grid)
            self.assertTrue(0.0 <= point.p_out_mc <= 1.0)
        rows = sweep_rows(stats)
        self.assertEqual(len(rows[0]), len(CSV_COLUMNS))

    def test_fixed_rules_carry_no_threshold(self):
        stats = run_sweep(small_config(relay_rule='phi1', max_trials=10))
        self.assertTrue(math.isnan(stats[0].tau))

    def test_metadata(self):
        metadata = sweep_metadata(small_config())
        self.assertEqual((metadata['M'], metadata['seed'], metadata['code']), (2, 99, 2))
