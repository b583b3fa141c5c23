##
# Destination decoders: genie-aided ML on the combined channel, GLRT over
# (message, decision slot), lattice decoding and the separated relay
# activity detector (RAD).
##
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from ddfsim.ddf.channel import (ChannelRealization, SignalBlock, SystemParams, alamouti_map, check_slot,
                                combined_gains, complex_gaussian)
from ddfsim.ddf.decoder import LinearModel, lattice_decode_mmse
from ddfsim.ddf.lattice import to_complex, to_real
from ddfsim.exceptions import ContractViolation, RankDeficientError, SearchFailure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecodeResult:
    message: int
    m_hat: int
    log_likelihood: float


def _check_block(y: SignalBlock, params: SystemParams):
    if len(y) != params.block_length:
        raise ContractViolation('received block must have length %d' % params.block_length)


def hypothesis_means(codewords: np.ndarray, m: int, ch: ChannelRealization, params: SystemParams) -> np.ndarray:
    """Noiseless destination signal for every codeword row, relay switching after slot m."""
    codewords = np.asarray(codewords, dtype=complex)
    return ch.g1 * codewords + ch.g2 * alamouti_map(codewords, m, params)


def likelihood(y: SignalBlock, message: int, m: int, ch: ChannelRealization, codebook,
               params: SystemParams) -> float:
    """log P(y | message, m) up to a constant."""
    _check_block(y, params)
    mean = hypothesis_means(codebook.encode(message).samples, m, ch, params)
    return -float(np.sum(np.abs(y.samples - mean) ** 2)) / ch.sigma_w2


def likelihood_grid(y: SignalBlock, ch: ChannelRealization, codebook, params: SystemParams) -> np.ndarray:
    """Log-likelihoods of every (message, m) pair, shape (size, M)."""
    _check_block(y, params)
    grid = np.empty((codebook.size, params.M))
    for m in range(1, params.M + 1):
        means = hypothesis_means(codebook.codewords, m, ch, params)
        grid[:, m - 1] = -np.sum(np.abs(y.samples[None, :] - means) ** 2, axis=1) / ch.sigma_w2
    return grid


def glrt_decode(y: SignalBlock, ch: ChannelRealization, codebook, params: SystemParams) -> DecodeResult:
    """
    Joint maximisation over (message, m). Ties go to the smallest m, then the
    smallest message.
    """
    grid = likelihood_grid(y, ch, codebook, params)
    m_index, message = divmod(int(np.argmax(grid.T)), codebook.size)
    return DecodeResult(message, m_index + 1, float(grid[message, m_index]))


def ml_decode_genie(y_combined: SignalBlock, m: int, ch: ChannelRealization, codebook,
                    params: SystemParams) -> int:
    """ML on the Alamouti-combined channel with the decision slot known."""
    _check_block(y_combined, params)
    gains = combined_gains(m, ch, params)
    distances = np.sum(np.abs(y_combined.samples[None, :] - gains * codebook.codewords) ** 2, axis=1)
    return int(np.argmin(distances))


def destination_model(y: SignalBlock, m: int, ch: ChannelRealization, params: SystemParams) -> LinearModel:
    """Real model of the whole destination block for decision slot m."""
    _check_block(y, params)
    unit = to_complex(np.eye(2 * params.block_length))
    H = to_real(hypothesis_means(unit, m, ch, params)).T
    return LinearModel(H, params.rho, to_real(y.samples))


def lattice_decode_destination(y: SignalBlock, m: int, ch: ChannelRealization, codebook,
                               params: SystemParams) -> int:
    return lattice_decode_mmse(destination_model(y, m, ch, params), codebook)


def glrt_decode_lattice(y: SignalBlock, ch: ChannelRealization, codebook, params: SystemParams) -> DecodeResult:
    """
    Lattice decode under every slot hypothesis and keep the candidate with
    the largest exact likelihood.
    """
    best = None
    for m in range(1, params.M + 1):
        try:
            message = lattice_decode_destination(y, m, ch, codebook, params)
        except (SearchFailure, RankDeficientError) as exc:
            logger.debug('destination lattice search failed for m=%d: %s', m, exc)
            continue
        score = likelihood(y, message, m, ch, codebook, params)
        if best is None or score > best.log_likelihood:
            best = DecodeResult(message, m, score)
    if best is None:
        raise SearchFailure(0, 0, 'lattice search failed under every decision slot')
    return best


def _rad_variances(ch: ChannelRealization, params: SystemParams):
    listening = abs(ch.g1) ** 2 * params.rho + 1.0
    forwarding = (abs(ch.g1) ** 2 + abs(ch.g2) ** 2) * params.rho + 1.0
    return listening, forwarding


def rad_log_likelihoods(y: SignalBlock, ch: ChannelRealization, params: SystemParams) -> np.ndarray:
    """
    Codebook-blind log-likelihood of each m, treating the input as Gaussian:
    per-sample variance a before the switch and b after it.
    """
    _check_block(y, params)
    a, b = _rad_variances(ch, params)
    slot_energy = np.sum(np.abs(y.samples.reshape(params.M, params.T)) ** 2, axis=1)
    listened = np.cumsum(slot_energy)
    m = np.arange(1, params.M + 1)
    total = listened[-1]
    return (-params.block_length * math.log(b) - total / b
            - m * params.T * (math.log(a) - math.log(b)) - listened * (1.0 / a - 1.0 / b))


def rad_detect(y: SignalBlock, ch: ChannelRealization, params: SystemParams) -> int:
    """Most likely decision slot; the smallest one wins ties."""
    return int(np.argmax(rad_log_likelihoods(y, ch, params))) + 1


def complex_chi2_cdf(dof: int, x: float) -> float:
    """P(sum of dof unit-variance complex Gaussians |.|^2 <= x)."""
    return float(gammainc(dof, x))


def rad_pairwise_closed_form(m: int, m_prime: int, ch: ChannelRealization, params: SystemParams) -> float:
    """
    P(RAD prefers m_prime over m | m true) for m < m_prime. The comparison
    reduces to the normalised energy of the (m_prime - m) T samples in
    between falling below K log(1 + X) / X, X = |g2|^2 rho / (|g1|^2 rho + 1).
    """
    check_slot(m, params)
    check_slot(m_prime, params)
    if m_prime <= m:
        raise ContractViolation('pairwise error needs m < m_prime')
    dof = (m_prime - m) * params.T
    a, b = _rad_variances(ch, params)
    x = b / a - 1.0
    threshold = dof * math.log1p(x) / x if x > 0 else float(dof)
    return complex_chi2_cdf(dof, threshold)


def rad_pairwise_infinite(ch: ChannelRealization, params: SystemParams) -> float:
    """
    Limit of the pairwise error as T grows: 1 when 1 - X + log X >= 0 with
    X = b / a, else 0. For X > 0 this only holds at X = 1.
    """
    a, b = _rad_variances(ch, params)
    ratio = b / a
    return 1.0 if 1.0 - ratio + math.log(ratio) >= 0 else 0.0


def rad_gaussian_block(m: int, ch: ChannelRealization, params: SystemParams, rng: np.random.Generator) -> SignalBlock:
    """Destination block under the Gaussian-input model the detector assumes."""
    check_slot(m, params)
    a, b = _rad_variances(ch, params)
    length = m * params.T
    samples = np.concatenate([complex_gaussian(rng, length, a),
                              complex_gaussian(rng, params.block_length - length, b)])
    return SignalBlock(samples, length)


def rad_pairwise_mc(m: int, m_prime: int, ch: ChannelRealization, params: SystemParams, trials: int,
                    rng: np.random.Generator) -> float:
    """Empirical P(ll(m_prime) >= ll(m) | m true) under the Gaussian-input model."""
    hits = 0
    for _ in range(trials):
        scores = rad_log_likelihoods(rad_gaussian_block(m, ch, params, rng), ch, params)
        hits += scores[m_prime - 1] >= scores[m - 1]
    return hits / trials
