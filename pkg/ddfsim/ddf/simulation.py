##
# End-to-end trial pipeline, stratified error counters, SNR sweeps and the
# Forney threshold calibration.
##
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache, partial
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ddfsim import settings
from ddfsim.ddf.channel import (SignalBlock, SystemParams, alamouti_combine, alamouti_relay_signal,
                                destination_receive, draw_channel, relay_receive)
from ddfsim.ddf.destination import (glrt_decode, glrt_decode_lattice, lattice_decode_destination,
                                    ml_decode_genie, rad_detect)
from ddfsim.ddf.dmt import outage_mc
from ddfsim.ddf.lattice import CosetCodebook, QamInfoSet, RotatedQamCodebook, build_rotation, coset_encode
from ddfsim.ddf.relay import (EXHAUSTIVE_ML, MMSE_GDFE_LATTICE, RELAY_DECODERS, RELAY_RULES, ForneyConfig,
                              relay_decide)
from ddfsim.ddf.udm import UdmCodebook, build_udm
from ddfsim.exceptions import RankDeficientError, SearchFailure, ValidationError

logger = logging.getLogger(__name__)

ROTATED_QAM = 'rotated-qam'
UDM_PERMUTATION = 'udm-permutation'
CODE_FAMILIES = (ROTATED_QAM, UDM_PERMUTATION)
DEST_DECODERS = ('genie-ml', 'glrt', 'mmse-gdfe-lattice', 'rad-then-ml')

# Stream tags keep trial, calibration and outage draws apart
TRIAL_STREAM = 0
CALIBRATION_STREAM = 1
OUTAGE_STREAM = 2

CSV_COLUMNS = ('snr_db', 'trials', 'err_total', 'err_relay', 'err_dest_given_relay_ok',
               'relay_silent_count', 'decoder_failures', 'p_out_mc', 'tau')


@dataclass(frozen=True)
class SimConfig:
    """
    One simulation campaign. `tau` holds one threshold for every SNR point
    or one per point; None asks for per-point calibration. `lattice_box`
    keeps lattice searches inside the coset code's shaping region.
    """
    params: SystemParams = field(default_factory=SystemParams)
    code_family: str = ROTATED_QAM
    qam_order: int = settings.DDF_QAM_ORDER
    udm: Tuple[int, int, int] = settings.DDF_UDM
    relay_rule: str = 'phiF'
    relay_decoder: str = EXHAUSTIVE_ML
    dest_decoder: str = 'genie-ml'
    tau: Optional[Tuple[float, ...]] = (1.0,)
    snr_db: Tuple[float, ...] = settings.DDF_SNR_GRID
    min_errors: int = settings.DDF_MIN_ERRORS
    max_trials: int = settings.DDF_MAX_TRIALS
    batch_size: int = settings.DDF_BATCH_SIZE
    list_size: int = settings.DDF_FORNEY_LIST_SIZE
    bd_mu: float = settings.DDF_BOUNDED_DISTANCE_MU
    target_fraction: float = settings.DDF_TAU_TARGET_FRACTION
    tau_grid: Tuple[float, ...] = settings.DDF_TAU_GRID
    calibration_trials: int = settings.DDF_CALIBRATION_TRIALS
    outage_trials: int = settings.DDF_OUTAGE_TRIALS
    noiseless: bool = False
    lattice_box: bool = True
    threads: int = 1

    def __post_init__(self):
        choices = (('code_family', CODE_FAMILIES), ('relay_rule', RELAY_RULES),
                   ('relay_decoder', RELAY_DECODERS), ('dest_decoder', DEST_DECODERS))
        errors = ['unknown %s %r (expected one of %s)' % (name, getattr(self, name), ', '.join(allowed))
                  for name, allowed in choices if getattr(self, name) not in allowed]
        if errors:
            raise ValidationError(errors)

    @property
    def seed(self) -> int:
        return self.params.seed

    @property
    def coset_mode(self) -> bool:
        return self.relay_decoder == MMSE_GDFE_LATTICE

    def params_at(self, snr_index: int) -> SystemParams:
        return self.params.at_snr(self.snr_db[snr_index])

    def tau_at(self, snr_index: int) -> float:
        if self.tau is None:
            raise ValueError('threshold not calibrated yet')
        return self.tau[0] if len(self.tau) == 1 else self.tau[snr_index]

    def codebook(self, params: SystemParams):
        return build_codebook(self.code_family, self.qam_order, tuple(self.udm), self.coset_mode,
                              params.block_length, params.energy, self.lattice_box)


@lru_cache(maxsize=64)
def build_codebook(code_family: str, qam_order: int, udm: Tuple[int, int, int], coset: bool,
                   block_length: int, energy: float, shaped: bool = True):
    if code_family == UDM_PERMUTATION:
        return UdmCodebook(build_udm(*udm), energy)
    generator = build_rotation(block_length)
    if coset:
        return CosetCodebook(generator, qam_order, energy, shaped=shaped)
    return RotatedQamCodebook(generator, QamInfoSet(qam_order, block_length), energy)


@dataclass(frozen=True)
class TrialOutcome:
    decision_time: int
    relay_error: bool
    dest_error: bool
    relay_silent: bool
    decoder_failure: bool = False


@dataclass
class ErrorStats:
    """
    Counters for one SNR point. err_total always equals
    err_joint + err_dest_given_relay_ok.
    """
    snr_db: float
    M: int
    trials: int = 0
    err_total: int = 0
    err_relay: int = 0
    err_joint: int = 0
    err_dest_given_relay_ok: int = 0
    relay_silent_count: int = 0
    decoder_failures: int = 0
    histogram: List[int] = None
    p_out_mc: float = math.nan
    tau: float = math.nan

    def __post_init__(self):
        if self.histogram is None:
            self.histogram = [0] * self.M

    def add(self, outcome: TrialOutcome):
        self.trials += 1
        self.histogram[outcome.decision_time - 1] += 1
        self.err_relay += outcome.relay_error
        self.relay_silent_count += outcome.relay_silent
        self.decoder_failures += outcome.decoder_failure
        if outcome.dest_error:
            self.err_total += 1
            if outcome.relay_error:
                self.err_joint += 1
            else:
                self.err_dest_given_relay_ok += 1

    def merge(self, other: 'ErrorStats') -> 'ErrorStats':
        merged = replace(self, histogram=[a + b for a, b in zip(self.histogram, other.histogram)])
        for name in ('trials', 'err_total', 'err_relay', 'err_joint', 'err_dest_given_relay_ok',
                     'relay_silent_count', 'decoder_failures'):
            setattr(merged, name, getattr(self, name) + getattr(other, name))
        return merged

    @property
    def p_error(self) -> float:
        return self.err_total / self.trials if self.trials else math.nan

    @property
    def p_relay_error(self) -> float:
        return self.err_relay / self.trials if self.trials else math.nan

    def csv_row(self) -> tuple:
        return (self.snr_db, self.trials, self.err_total, self.err_relay, self.err_dest_given_relay_ok,
                self.relay_silent_count, self.decoder_failures, self.p_out_mc, self.tau)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *key); independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


def _decode_destination(cfg: SimConfig, y: SignalBlock, m_true: int, ch, codebook, params: SystemParams) -> int:
    if cfg.dest_decoder == 'glrt':
        if cfg.coset_mode:
            return glrt_decode_lattice(y, ch, codebook, params).message
        return glrt_decode(y, ch, codebook, params).message
    if cfg.dest_decoder == 'mmse-gdfe-lattice':
        return lattice_decode_destination(y, m_true, ch, codebook, params)
    # genie-ml and rad-then-ml; SimConfig rejects any other name
    m = rad_detect(y, ch, params) if cfg.dest_decoder == 'rad-then-ml' else m_true
    return ml_decode_genie(alamouti_combine(y, m, ch, params), m, ch, codebook, params)


def simulate_trial(cfg: SimConfig, params: SystemParams, rng: np.random.Generator, tau: float) -> TrialOutcome:
    """
    One block through the whole chain. The draw order is fixed: channel,
    message, dither, relay noise, destination noise.
    """
    codebook = cfg.codebook(params)
    ch = draw_channel(params, rng)
    message = int(rng.integers(codebook.size))
    if cfg.coset_mode:
        x_s, codebook = coset_encode(message, codebook, rng)
    else:
        x_s = codebook.encode(message)
    y_r = relay_receive(x_s, params.M, ch, rng, params, cfg.noiseless)
    forney = ForneyConfig(tau, cfg.list_size) if cfg.relay_rule == 'phiF' else None
    decision = relay_decide(cfg.relay_rule, ch.h, y_r, codebook, params, message, forney, cfg.relay_decoder,
                            cfg.bd_mu / params.T * math.log(1.0 + params.rho))
    if decision.silent:
        x_r = SignalBlock(np.zeros(params.block_length))
    else:
        x_r = alamouti_relay_signal(codebook.encode(decision.message), decision.m, params)
    y = destination_receive(x_s, x_r, decision.m, ch, rng, params, cfg.noiseless)
    failure = False
    try:
        decoded = _decode_destination(cfg, y, decision.m, ch, codebook, params)
    except (SearchFailure, RankDeficientError) as exc:
        logger.debug('destination decoder failed: %s', exc)
        decoded, failure = None, True
    return TrialOutcome(decision_time=decision.m,
                        relay_error=not decision.silent and decision.message != message,
                        dest_error=decoded != message,
                        relay_silent=decision.silent,
                        decoder_failure=failure)


def run_trial(cfg: SimConfig, trial_index: int, seed: Optional[int] = None, snr_index: int = 0,
              tau: Optional[float] = None) -> TrialOutcome:
    """Trial `trial_index` at SNR point `snr_index`; the same arguments always give the same outcome."""
    seed = cfg.seed if seed is None else seed
    if tau is None:
        tau = cfg.tau_at(snr_index)
    rng = substream(seed, TRIAL_STREAM, snr_index, trial_index)
    return simulate_trial(cfg, cfg.params_at(snr_index), rng, tau)


def _trial_job(cfg, snr_index, tau, trial_index):
    return run_trial(cfg, trial_index, snr_index=snr_index, tau=tau)


def _snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000)) % (1 << 32)


def _calibration_job(cfg, params, trial_index, tau):
    rng = substream(cfg.seed, CALIBRATION_STREAM, _snr_key(params.rho_db), trial_index)
    return simulate_trial(cfg, params, rng, tau)


class _Runner(object):
    """Ordered map over trial indices, in-process or on a worker pool."""

    def __init__(self, threads: int):
        self.pool = Pool(threads) if threads > 1 else None

    def map(self, function, items):
        if self.pool is None:
            return list(map(function, items))
        return self.pool.map(function, items)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.close()
            self.pool.join()


def run_point(cfg: SimConfig, snr_index: int, tau: float, runner: Optional[_Runner] = None) -> ErrorStats:
    """
    Trials in index order until min_errors destination errors or max_trials.
    Batches run in parallel but are folded in order and cut at the trial that
    reaches min_errors, so the counters do not depend on the worker count.
    """
    runner = runner or _Runner(1)
    params = cfg.params_at(snr_index)
    stats = ErrorStats(params.rho_db, params.M, tau=tau)
    job = partial(_trial_job, cfg, snr_index, tau)
    start = 0
    while start < cfg.max_trials and stats.err_total < cfg.min_errors:
        stop = min(start + cfg.batch_size, cfg.max_trials)
        for outcome in runner.map(job, range(start, stop)):
            stats.add(outcome)
            if stats.err_total >= cfg.min_errors:
                break
        start = stop
    return stats


def calibrate_tau(cfg: SimConfig, snr_db: float, target_fraction: Optional[float] = None,
                  runner: Optional[_Runner] = None) -> float:
    """
    Smallest grid threshold whose relay error rate is at most
    target_fraction times the destination error rate, measured with phiF on
    a fixed set of calibration trials. Falls back to the largest threshold.
    """
    target_fraction = cfg.target_fraction if target_fraction is None else target_fraction
    if not 0 < target_fraction <= 1:
        raise ValueError('target fraction must lie in (0, 1] (got %r)' % (target_fraction,))
    runner = runner or _Runner(1)
    calibration = replace(cfg, relay_rule='phiF')
    params = cfg.params.at_snr(snr_db)
    grid = sorted(cfg.tau_grid)
    for tau in grid:
        outcomes = runner.map(partial(_calibration_job, calibration, params, tau=tau),
                              range(cfg.calibration_trials))
        relay_errors = sum(outcome.relay_error for outcome in outcomes)
        dest_errors = sum(outcome.dest_error for outcome in outcomes)
        if relay_errors <= target_fraction * dest_errors:
            logger.info('tau at %.1f dB: %g (%d relay / %d destination errors)', snr_db, tau, relay_errors,
                        dest_errors)
            return tau
    logger.warning('tau grid exhausted at %.1f dB; using %g', snr_db, grid[-1])
    return grid[-1]


def run_sweep(cfg: SimConfig) -> List[ErrorStats]:
    """Error counters for every SNR point, with the outage reference alongside."""
    stats = []
    with _Runner(cfg.threads) as runner:
        for snr_index, snr_db in enumerate(cfg.snr_db):
            if cfg.relay_rule != 'phiF':
                tau = math.nan
            elif cfg.tau is None:
                tau = calibrate_tau(cfg, snr_db, runner=runner)
            else:
                tau = cfg.tau_at(snr_index)
            point = run_point(cfg, snr_index, tau, runner)
            outage_rng = substream(cfg.seed, OUTAGE_STREAM, snr_index)
            point.p_out_mc = outage_mc(cfg.params_at(snr_index), cfg.outage_trials, outage_rng).p_out
            logger.info('%.1f dB: %d errors in %d trials (relay %d), outage %g', snr_db, point.err_total,
                        point.trials, point.err_relay, point.p_out_mc)
            stats.append(point)
    return stats


def sweep_metadata(cfg: SimConfig) -> dict:
    return {
        'M': cfg.params.M, 'T': cfg.params.T, 'R': cfg.params.R, 'seed': cfg.seed,
        'rho_prime_offset_db': cfg.params.rho_prime_offset_db,
        'code_family': cfg.code_family,
        'code': cfg.qam_order if cfg.code_family == ROTATED_QAM else ','.join(str(v) for v in cfg.udm),
        'relay_rule': cfg.relay_rule, 'relay_decoder': cfg.relay_decoder, 'dest_decoder': cfg.dest_decoder,
        'lattice_box': cfg.lattice_box,
        'min_errors': cfg.min_errors, 'max_trials': cfg.max_trials,
    }


def sweep_rows(stats: Sequence[ErrorStats]):
    return [point.csv_row() for point in stats]
