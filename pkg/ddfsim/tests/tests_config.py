import math
import tempfile
from pathlib import Path

from unittest import TestCase

from ddfsim import settings
from ddfsim.config import SimConfigForm, check_config, code_rate, default_data, load_config, read_config_file
from ddfsim.exceptions import ValidationError


class ConfigFileMixin(object):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = Path(self.tmp.name) / 'sim.conf'
        path.write_text(text)
        return path


class TestReadConfigFile(ConfigFileMixin, TestCase):

    def test_comments_and_blank_lines(self):
        path = self.write('# campaign\nM = 2\n\nT=2   # slot length\nM = 3\n')
        self.assertEqual(read_config_file(path), {'M': '3', 'T': '2'})

    def test_bad_line(self):
        path = self.write('M = 2\nnot a setting\nT\n')
        with self.assertRaises(ValidationError) as context:
            read_config_file(path)
        self.assertEqual(len(context.exception.messages), 2)

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            read_config_file(Path(self.tmp.name) / 'absent.conf')


class TestLoadConfig(ConfigFileMixin, TestCase):

    def test_defaults(self):
        cfg = load_config()
        self.assertEqual((cfg.params.M, cfg.params.T, cfg.params.R), (settings.DDF_SLOTS, settings.DDF_SLOT_LENGTH,
                                                                      settings.DDF_RATE))
        self.assertIsNone(cfg.tau)
        self.assertEqual(cfg.snr_db, tuple(float(v) for v in settings.DDF_SNR_GRID))
        self.assertEqual(cfg.seed, settings.DDF_SEED)

    def test_file_and_overrides(self):
        path = self.write('M = 2\nT = 2\nseed = 5\nsnr_db = 0:10:2.5\ntau = 0.5\nnoiseless = yes\n')
        cfg = load_config(path, seed=11, threads=None)
        self.assertEqual((cfg.params.M, cfg.params.T, cfg.seed), (2, 2, 11))
        self.assertEqual(cfg.snr_db, (0.0, 2.5, 5.0, 7.5, 10.0))
        self.assertEqual(cfg.tau, (0.5,))
        self.assertTrue(cfg.noiseless)
        self.assertEqual(cfg.threads, 1)

    def test_threshold_per_point(self):
        cfg = load_config(snr_db='0, 10', tau='1,2')
        self.assertEqual(cfg.tau, (1.0, 2.0))
        self.assertEqual(cfg.tau_at(1), 2.0)
        self.assertEqual(load_config(tau='inf').tau, (math.inf,))

    def test_threshold_count_mismatch(self):
        with self.assertRaises(ValidationError):
            load_config(snr_db='0,10,20', tau='1,2')

    def test_unknown_setting(self):
        with self.assertRaises(ValidationError) as context:
            load_config(colour='blue')
        self.assertIn('Unknown setting colour', context.exception.messages)

    def test_all_errors_are_collected(self):
        with self.assertRaises(ValidationError) as context:
            load_config(M='0', relay_rule='phi7', snr_db='low')
        self.assertEqual(len(context.exception.messages), 3)

    def test_bad_range(self):
        with self.assertRaises(ValidationError):
            load_config(snr_db='10:0:2')

    def test_rate_mismatch(self):
        with self.assertRaises(ValidationError) as context:
            load_config(R='3')
        self.assertIn('code rate 2 does not match R = 3', context.exception.messages)

    def test_odd_slot_length(self):
        with self.assertRaises(ValidationError):
            load_config(T='3')

    def test_udm_family(self):
        cfg = load_config(code_family='udm-permutation', udm='4,2,4', R='2')
        self.assertEqual(cfg.udm, (4, 2, 4))
        self.assertEqual(code_rate(cfg), 2.0)
        with self.assertRaises(ValidationError):
            load_config(code_family='udm-permutation', udm='8,4,4', R='2')

    def test_lattice_combinations(self):
        cfg = load_config(relay_decoder='mmse-gdfe-lattice', dest_decoder='glrt')
        self.assertTrue(cfg.coset_mode)
        self.assertTrue(cfg.lattice_box)
        unshaped = load_config(relay_decoder='mmse-gdfe-lattice', dest_decoder='glrt', lattice_box='no')
        self.assertFalse(unshaped.lattice_box)
        with self.assertRaises(ValidationError):
            load_config(relay_decoder='mmse-gdfe-lattice', dest_decoder='genie-ml')
        with self.assertRaises(ValidationError):
            load_config(dest_decoder='mmse-gdfe-lattice')
        with self.assertRaises(ValidationError):
            load_config(relay_rule='bounded-distance', relay_decoder='mmse-gdfe-lattice', dest_decoder='glrt')


class TestForm(TestCase):

    def test_missing_required(self):
        data = default_data()
        del data['M']
        form = SimConfigForm(data)
        self.assertFalse(form.is_valid())
        self.assertEqual(form.errors, ['The required setting M is missing'])

    def test_valid_defaults(self):
        form = SimConfigForm(default_data())
        self.assertTrue(form.is_valid())
        self.assertEqual(check_config(form.cleaned_data), [])
