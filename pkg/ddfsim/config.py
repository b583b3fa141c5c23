##
# Key-value simulation config files and their validation into a SimConfig
##
import logging
import math
import re
from pathlib import Path

import numpy as np

from ddfsim import settings
from ddfsim.ddf.channel import SystemParams
from ddfsim.ddf.relay import EXHAUSTIVE_ML, MMSE_GDFE_LATTICE
from ddfsim.ddf.simulation import ROTATED_QAM, UDM_PERMUTATION, SimConfig
from ddfsim.exceptions import ValidationError

logger = logging.getLogger(__name__)

FLOAT = r'[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?'
POSITIVE_INT = r'^[1-9][0-9]{0,9}$'


def read_config_file(path) -> dict:
    """
    `key = value` lines; `#` starts a comment, blank lines are skipped.
    A key given twice keeps its last value.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError('Unable to read config file %s: %s' % (path, exc))
    data = {}
    errors = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            errors.append('%s:%d: expected "key = value"' % (path, number))
            continue
        key, value = (part.strip() for part in line.split('=', 1))
        data[key] = value
    if errors:
        raise ValidationError(errors)
    return data


def default_data() -> dict:
    """Settings defaults in config-file form."""
    return {
        'M': str(settings.DDF_SLOTS), 'T': str(settings.DDF_SLOT_LENGTH), 'R': repr(settings.DDF_RATE),
        'rho_prime_offset_db': repr(settings.DDF_RELAY_SNR_OFFSET_DB), 'seed': str(settings.DDF_SEED),
        'code_family': ROTATED_QAM, 'qam_order': str(settings.DDF_QAM_ORDER),
        'udm': ','.join(str(v) for v in settings.DDF_UDM),
        'relay_rule': 'phiF', 'relay_decoder': EXHAUSTIVE_ML, 'dest_decoder': 'genie-ml', 'tau': 'auto',
        'snr_db': ','.join(str(v) for v in settings.DDF_SNR_GRID),
        'min_errors': str(settings.DDF_MIN_ERRORS), 'max_trials': str(settings.DDF_MAX_TRIALS),
    }


class SimConfigForm(object):
    """
    Validates a raw config mapping against regular expressions, then builds
    the typed SimConfig. All problems are collected before raising.
    """
    required = {
        'M': POSITIVE_INT, 'T': POSITIVE_INT, 'R': '^%s$' % FLOAT, 'seed': r'^[0-9]{1,19}$',
        'code_family': '^(%s|%s)$' % (ROTATED_QAM, UDM_PERMUTATION),
        'relay_rule': '^(phi1|phi2|phi3|phiF|bounded-distance|genie)$',
        'relay_decoder': '^(%s|%s)$' % (EXHAUSTIVE_ML, MMSE_GDFE_LATTICE),
        'dest_decoder': '^(genie-ml|glrt|mmse-gdfe-lattice|rad-then-ml)$',
        'snr_db': r'^{f}(\s*:\s*{f}\s*:\s*{f}|(\s*,\s*{f})*)$'.format(f=FLOAT),
        'min_errors': POSITIVE_INT, 'max_trials': POSITIVE_INT,
    }

    optional = {
        'rho_prime_offset_db': '^%s$' % FLOAT,
        'qam_order': r'^[1-9][0-9]{0,2}$',
        'udm': r'^[1-9][0-9]{0,2}\s*,\s*[1-9][0-9]{0,2}\s*,\s*[1-9][0-9]{0,3}$',
        'tau': r'^(auto|{f}(\s*,\s*{f})*|inf)$'.format(f=FLOAT),
        'batch_size': POSITIVE_INT, 'list_size': POSITIVE_INT,
        'bd_mu': '^%s$' % FLOAT, 'target_fraction': '^%s$' % FLOAT,
        'calibration_trials': POSITIVE_INT, 'outage_trials': POSITIVE_INT, 'threads': r'^[1-9][0-9]{0,3}$',
        'noiseless': '^(0|1|true|false|yes|no)$', 'lattice_box': '^(0|1|true|false|yes|no)$',
    }

    def __init__(self, data: dict):
        self.data = dict(data)
        self.errors = []
        self.cleaned_data = None

    ##
    # Validate one value against its regular expression
    ##
    def is_valid_requirement(self, key, requirement):
        value = self.data[key]
        if not isinstance(value, str) or not re.search(requirement, value.strip()):
            self.errors.append('Invalid value %r for %s' % (value, key))
            return False
        return True

    def is_valid_required_data(self):
        valid = True
        for key, requirement in self.required.items():
            if key in self.data:
                valid = self.is_valid_requirement(key, requirement) and valid
            else:
                self.errors.append('The required setting %s is missing' % key)
                valid = False
        return valid

    def is_valid_optional_data(self):
        valid = True
        for key in self.data:
            if key in self.optional:
                valid = self.is_valid_requirement(key, self.optional[key]) and valid
            elif key not in self.required:
                self.errors.append('Unknown setting %s' % key)
                valid = False
        return valid

    def is_valid(self) -> bool:
        self.errors = []
        valid = self.is_valid_required_data()
        valid = self.is_valid_optional_data() and valid
        if not valid:
            return False
        try:
            self.cleaned_data = self.clean()
        except ValidationError as exc:
            self.errors.extend(exc.messages)
            return False
        return True

    def _value(self, key, cast, default):
        return cast(self.data[key].strip()) if key in self.data else default

    def _snr_grid(self):
        text = self.data['snr_db']
        if ':' in text:
            start, stop, step = (float(v) for v in text.split(':'))
            if step <= 0 or stop < start:
                raise ValidationError('snr_db range needs start <= stop and a positive step')
            return tuple(float(v) for v in np.round(np.arange(start, stop + step / 2, step), 10))
        return tuple(float(v) for v in text.split(','))

    def _tau(self, points):
        text = self.data.get('tau', 'auto').strip()
        if text == 'auto':
            return None
        tau = tuple(float(v) for v in text.split(','))
        if any(v < 0 for v in tau):
            raise ValidationError('Forney thresholds must be >= 0')
        if len(tau) not in (1, points):
            raise ValidationError('tau needs one value or one per SNR point (%d)' % points)
        return tau

    def clean(self) -> SimConfig:
        """Typed config plus the cross-field checks."""
        params = SystemParams(M=int(self.data['M']), T=int(self.data['T']), R=float(self.data['R']),
                              rho_prime_offset_db=self._value('rho_prime_offset_db', float,
                                                              settings.DDF_RELAY_SNR_OFFSET_DB),
                              seed=int(self.data['seed']))
        snr_db = self._snr_grid()
        cfg = SimConfig(
            params=params,
            code_family=self.data['code_family'].strip(),
            qam_order=self._value('qam_order', int, settings.DDF_QAM_ORDER),
            udm=self._value('udm', lambda v: tuple(int(x) for x in v.split(',')), settings.DDF_UDM),
            relay_rule=self.data['relay_rule'].strip(),
            relay_decoder=self.data['relay_decoder'].strip(),
            dest_decoder=self.data['dest_decoder'].strip(),
            tau=self._tau(len(snr_db)),
            snr_db=snr_db,
            min_errors=int(self.data['min_errors']),
            max_trials=int(self.data['max_trials']),
            batch_size=self._value('batch_size', int, settings.DDF_BATCH_SIZE),
            list_size=self._value('list_size', int, settings.DDF_FORNEY_LIST_SIZE),
            bd_mu=self._value('bd_mu', float, settings.DDF_BOUNDED_DISTANCE_MU),
            target_fraction=self._value('target_fraction', float, settings.DDF_TAU_TARGET_FRACTION),
            calibration_trials=self._value('calibration_trials', int, settings.DDF_CALIBRATION_TRIALS),
            outage_trials=self._value('outage_trials', int, settings.DDF_OUTAGE_TRIALS),
            noiseless=self._value('noiseless', lambda v: v in ('1', 'true', 'yes'), False),
            lattice_box=self._value('lattice_box', lambda v: v in ('1', 'true', 'yes'), True),
            threads=self._value('threads', int, 1),
        )
        errors = check_config(cfg)
        if errors:
            raise ValidationError(errors)
        return cfg


def code_rate(cfg: SimConfig) -> float:
    if cfg.code_family == UDM_PERMUTATION:
        L, n, q = cfg.udm
        return 2 * n * math.log2(q) / L
    return 2 * math.log2(cfg.qam_order)


def check_config(cfg: SimConfig) -> list:
    """Cross-field problems of a typed config, as a list of messages."""
    errors = []
    params = cfg.params
    if not math.isclose(code_rate(cfg), params.R, rel_tol=1e-9, abs_tol=1e-12):
        errors.append('code rate %g does not match R = %g' % (code_rate(cfg), params.R))
    if cfg.code_family == ROTATED_QAM and (cfg.qam_order < 2 or cfg.qam_order % 2):
        errors.append('rotated QAM needs an even Q >= 2')
    if cfg.code_family == UDM_PERMUTATION:
        L, n, q = cfg.udm
        if L != params.block_length:
            errors.append('UDM length L = %d must equal M T = %d' % (L, params.block_length))
        if L > q + 1:
            errors.append('UDM needs L <= q + 1')
    if cfg.coset_mode or cfg.dest_decoder == MMSE_GDFE_LATTICE:
        if cfg.code_family != ROTATED_QAM:
            errors.append('lattice decoding needs the rotated-qam code family')
        if not cfg.coset_mode:
            errors.append('destination lattice decoding needs relay_decoder = %s' % MMSE_GDFE_LATTICE)
        if cfg.dest_decoder not in ('glrt', MMSE_GDFE_LATTICE):
            errors.append('with the coset code the destination decoder must be glrt or %s' % MMSE_GDFE_LATTICE)
    if cfg.relay_rule == 'bounded-distance' and cfg.relay_decoder != EXHAUSTIVE_ML:
        errors.append('the bounded-distance rule needs relay_decoder = %s' % EXHAUSTIVE_ML)
    if params.T > 1 and params.T % 2:
        errors.append('odd slot length T = %d cannot carry Alamouti pairs' % params.T)
    if not 0 < cfg.target_fraction <= 1:
        errors.append('target_fraction must lie in (0, 1]')
    if cfg.list_size < 2:
        errors.append('list_size must be at least 2')
    if cfg.bd_mu <= 0:
        errors.append('bd_mu must be positive')
    return errors


def load_config(path=None, **overrides) -> SimConfig:
    """Defaults, then the file at `path`, then non-None overrides."""
    data = default_data()
    if path is not None:
        data.update(read_config_file(path))
    data.update({key: str(value) for key, value in overrides.items() if value is not None})
    form = SimConfigForm(data)
    if not form.is_valid():
        for message in form.errors:
            logger.debug('config error: %s', message)
        raise ValidationError(form.errors)
    return form.cleaned_data
