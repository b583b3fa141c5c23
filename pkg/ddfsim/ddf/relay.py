##
# Relay decision rules: when to stop listening and which message to forward.
##
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ddfsim import settings
from ddfsim.ddf.channel import SignalBlock, SystemParams, check_slot, complex_gaussian
from ddfsim.ddf.decoder import LinearModel, candidate_list, mmse_gdfe_search
from ddfsim.ddf.lattice import to_complex, to_real
from ddfsim.exceptions import ContractViolation, RankDeficientError, SearchFailure, ValidationError

logger = logging.getLogger(__name__)

EXHAUSTIVE_ML = 'exhaustive-ml'
MMSE_GDFE_LATTICE = 'mmse-gdfe-lattice'
RELAY_DECODERS = (EXHAUSTIVE_ML, MMSE_GDFE_LATTICE)
RELAY_RULES = ('phi1', 'phi2', 'phi3', 'phiF', 'bounded-distance', 'genie')


@dataclass(frozen=True)
class RelayDecision:
    """Slot m after which the relay transmits message, or m = M and no message when silent."""
    m: int
    message: Optional[int] = None
    truncated: bool = False

    @property
    def silent(self) -> bool:
        return self.message is None


@dataclass(frozen=True)
class ForneyConfig:
    tau: float
    list_size: int = settings.DDF_FORNEY_LIST_SIZE

    def __post_init__(self):
        if math.isnan(self.tau) or self.tau < 0:
            raise ValidationError('Forney threshold must be >= 0 (got %r)' % (self.tau,))
        if int(self.list_size) != self.list_size or self.list_size < 2:
            raise ValidationError('Forney list size must be an integer >= 2 (got %r)' % (self.list_size,))


@dataclass(frozen=True)
class ForneyTest:
    log_ratio: float
    truncated: bool = False


def phi1(h: complex, params: SystemParams) -> int:
    """First slot at which the accumulated relay mutual information reaches M T R."""
    rate = math.log2(1.0 + abs(h) ** 2 * params.rho_prime)
    if rate <= 0:
        return params.M
    ratio = params.M * params.R / rate
    if not math.isfinite(ratio) or ratio >= params.M:
        return params.M
    return max(1, math.ceil(ratio))


def phi1_vector(h: np.ndarray, params: SystemParams) -> np.ndarray:
    """phi1 over an array of relay gains."""
    rate = np.log2(1.0 + np.abs(h) ** 2 * params.rho_prime)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = params.M * params.R / rate
    slots = np.clip(np.ceil(np.where(rate > 0, ratio, params.M)), 1, params.M)
    return slots.astype(np.int64)


def phi2(h: complex, params: SystemParams) -> int:
    return min(params.M, phi1(h, params) + 1)


def phi3(h: complex, params: SystemParams) -> int:
    return min(params.M, max(math.ceil(params.M / 2), phi1(h, params)))


DECISION_FUNCTIONS = {'phi1': phi1, 'phi2': phi2, 'phi3': phi3}


def relay_outage(h: complex, m: int, params: SystemParams) -> bool:
    """|h|^2 <= (2^(M R / m) - 1) / rho': the relay cannot yet support the rate."""
    check_slot(m, params)
    return abs(h) ** 2 <= (2.0 ** (params.M * params.R / m) - 1.0) / params.rho_prime


##
# Exhaustive likelihoods of every codeword given the first L = len(y_prefix)
# relay samples. Ties in the argmax go to the smallest message index.
##
def prefix_log_likelihoods(y_prefix: SignalBlock, h: complex, codewords: np.ndarray, sigma_v2: float) -> np.ndarray:
    length = len(y_prefix)
    difference = y_prefix.samples[None, :] - h * codewords[:, :length]
    return -np.sum(np.abs(difference) ** 2, axis=1) / sigma_v2


def forney_log_ratio(log_likelihoods: np.ndarray, omega_hat: int) -> float:
    """log P(y | omega_hat) - log sum of the others, +inf with no competitor."""
    others = np.delete(log_likelihoods, omega_hat)
    if others.size == 0:
        return math.inf
    return float(log_likelihoods[omega_hat] - logsumexp(others))


def passes_threshold(log_ratio: float, tau: float) -> bool:
    """tau = 0 always accepts, tau = inf never does."""
    if tau == 0:
        return True
    if math.isinf(tau):
        return False
    return log_ratio >= math.log(tau)


def forney_accept(y_prefix: SignalBlock, h: complex, codebook, omega_hat: int, cfg: ForneyConfig,
                  sigma_v2: float) -> bool:
    """Forney's erasure test on the exhaustive likelihoods of the prefix."""
    log_likelihoods = prefix_log_likelihoods(y_prefix, h, codebook.codewords, sigma_v2)
    return passes_threshold(forney_log_ratio(log_likelihoods, omega_hat), cfg.tau)


def modified_forney_test(y_prime: np.ndarray, filters, codebook, omega_hat: int, cfg: ForneyConfig,
                         sigma_v2: float, box: Optional[np.ndarray] = None) -> ForneyTest:
    """
    Forney's test restricted to the `list_size` lattice points closest to the
    filtered observation, summing likelihoods per coset. Inside a shaping
    `box` the list stops at the codebook size. A list holding one coset only
    has an empty denominator: accept, and flag the truncation unless the
    codebook has a single message.
    """
    size = cfg.list_size if box is None else min(cfg.list_size, codebook.size)
    points, distances = candidate_list(filters.backward @ codebook.basis, y_prime, size, box=box,
                                       with_distances=True)
    log_likelihoods = -distances / sigma_v2
    in_coset = np.array([codebook.coset_of(z) == omega_hat for z in points])
    if not in_coset.any():
        return ForneyTest(-math.inf)
    if in_coset.all():
        logger.debug('Forney list of %d points holds only coset %d', size, omega_hat)
        return ForneyTest(math.inf, truncated=codebook.size > 1)
    numerator = logsumexp(log_likelihoods[in_coset])
    denominator = logsumexp(log_likelihoods[~in_coset])
    return ForneyTest(float(numerator - denominator))


def modified_forney_accept(y_prime: np.ndarray, filters, codebook, omega_hat: int, cfg: ForneyConfig,
                           sigma_v2: float) -> bool:
    test = modified_forney_test(y_prime, filters, codebook, omega_hat, cfg, sigma_v2)
    return passes_threshold(test.log_ratio, cfg.tau)


def relay_model(y_prefix: SignalBlock, h: complex, m: int, params: SystemParams) -> LinearModel:
    """Real model of the first m T relay samples against the full-length codeword."""
    length = m * params.T
    if len(y_prefix) != length:
        raise ContractViolation('relay prefix must hold %d samples' % length)
    unit = to_complex(np.eye(2 * params.block_length))
    H = to_real(h * unit[:, :length]).T
    return LinearModel(H, params.rho_prime, to_real(y_prefix.samples))


def relay_decode(y_prefix: SignalBlock, h: complex, m: int, codebook, params: SystemParams,
                 decoder: str = EXHAUSTIVE_ML) -> int:
    """Maximum-likelihood (or lattice) estimate of the source message from the prefix."""
    if decoder == EXHAUSTIVE_ML:
        return int(np.argmax(prefix_log_likelihoods(y_prefix, h, codebook.codewords, params.sigma_v2)))
    search = mmse_gdfe_search(relay_model(y_prefix, h, m, params), codebook)
    return codebook.coset_of(search.point)


def _forney_step(prefix, h, m, codebook, params, cfg, decoder):
    if decoder == EXHAUSTIVE_ML:
        log_likelihoods = prefix_log_likelihoods(prefix, h, codebook.codewords, params.sigma_v2)
        omega = int(np.argmax(log_likelihoods))
        return omega, ForneyTest(forney_log_ratio(log_likelihoods, omega))
    search = mmse_gdfe_search(relay_model(prefix, h, m, params), codebook)
    omega = codebook.coset_of(search.point)
    return omega, modified_forney_test(search.observation, search.filters, codebook, omega, cfg,
                                       params.sigma_v2, search.box)


def phiF_run(h: complex, y_r: SignalBlock, codebook, params: SystemParams, cfg: ForneyConfig,
             decoder: str = EXHAUSTIVE_ML) -> RelayDecision:
    """
    Starting at phi1, decode each prefix and stop at the first slot m < M
    whose estimate passes the Forney test. Only samples up to slot m are
    read. A failed lattice search counts as a rejection.
    """
    for m in range(phi1(h, params), params.M):
        prefix = y_r.prefix(m * params.T)
        try:
            omega, test = _forney_step(prefix, h, m, codebook, params, cfg, decoder)
        except (SearchFailure, RankDeficientError) as exc:
            logger.debug('relay decoder failed at slot %d: %s', m, exc)
            continue
        if passes_threshold(test.log_ratio, cfg.tau):
            return RelayDecision(m, omega, test.truncated)
    return RelayDecision(params.M)


def fixed_rule_run(rule: str, h: complex, y_r: SignalBlock, codebook, params: SystemParams,
                   decoder: str = EXHAUSTIVE_ML) -> RelayDecision:
    """Decode at the slot chosen by phi1, phi2 or phi3; silent when that slot is M."""
    m = DECISION_FUNCTIONS[rule](h, params)
    if m >= params.M:
        return RelayDecision(params.M)
    try:
        message = relay_decode(y_r.prefix(m * params.T), h, m, codebook, params, decoder)
    except (SearchFailure, RankDeficientError) as exc:
        logger.debug('relay decoder failed at slot %d: %s', m, exc)
        return RelayDecision(params.M)
    return RelayDecision(m, message)


def genie_run(h: complex, true_message: int, params: SystemParams) -> RelayDecision:
    """Relay that always decodes correctly at phi1."""
    m = phi1(h, params)
    if m >= params.M:
        return RelayDecision(params.M)
    return RelayDecision(m, true_message)


def default_delta(params: SystemParams, mu: float = settings.DDF_BOUNDED_DISTANCE_MU) -> float:
    return mu / params.T * math.log(1.0 + params.rho)


def bounded_distance_decide(y_prefix: SignalBlock, h: complex, codebook, m: int, delta: float,
                            params: SystemParams) -> Optional[int]:
    """
    The unique codeword within squared radius m T (1 + delta) sigma_v^2 of the
    prefix, or None when the relay is in outage or zero or several codewords
    qualify.
    """
    if relay_outage(h, m, params):
        return None
    length = m * params.T
    distances = -params.sigma_v2 * prefix_log_likelihoods(y_prefix.prefix(length), h, codebook.codewords,
                                                          params.sigma_v2)
    inside = np.flatnonzero(distances <= length * (1.0 + delta) * params.sigma_v2)
    if inside.size != 1:
        return None
    return int(inside[0])


def bounded_distance_run(h: complex, y_r: SignalBlock, codebook, params: SystemParams,
                         delta: float) -> RelayDecision:
    for m in range(1, params.M):
        message = bounded_distance_decide(y_r, h, codebook, m, delta, params)
        if message is not None:
            return RelayDecision(m, message)
    return RelayDecision(params.M)


def chernoff_tail_bound(m: int, T: int, delta: float) -> float:
    """Chernoff bound (1 + delta)^(m T) exp(-m T delta) on P(|v|^2 > m T (1 + delta) sigma^2)."""
    dof = m * T
    return math.exp(dof * (math.log1p(delta) - delta))


def noise_tail_mc(m: int, T: int, delta: float, trials: int, rng: np.random.Generator,
                  sigma_v2: float = 1.0) -> float:
    """Empirical probability that the relay noise leaves the decoding sphere."""
    noise = complex_gaussian(rng, (trials, m * T), sigma_v2)
    energy = np.sum(np.abs(noise) ** 2, axis=1)
    return float(np.mean(energy > m * T * (1.0 + delta) * sigma_v2))


def relay_decide(rule: str, h: complex, y_r: SignalBlock, codebook, params: SystemParams,
                 true_message: int, cfg: Optional[ForneyConfig] = None, decoder: str = EXHAUSTIVE_ML,
                 delta: Optional[float] = None) -> RelayDecision:
    if rule in DECISION_FUNCTIONS:
        return fixed_rule_run(rule, h, y_r, codebook, params, decoder)
    if rule == 'phiF':
        if cfg is None:
            raise ValidationError('the phiF rule needs a Forney threshold')
        return phiF_run(h, y_r, codebook, params, cfg, decoder)
    if rule == 'bounded-distance':
        if decoder != EXHAUSTIVE_ML:
            raise ValidationError('the bounded-distance rule needs the exhaustive relay decoder')
        return bounded_distance_run(h, y_r, codebook, params, default_delta(params) if delta is None else delta)
    if rule == 'genie':
        return genie_run(h, true_message, params)
    raise ValidationError('unknown relay rule %r' % (rule,))
