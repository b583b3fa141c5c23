##
# Diversity-multiplexing tradeoff curves of the DDF protocol, the Pareto
# decision-time fractions, and Monte Carlo outage estimates.
##
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence

import numpy as np
from scipy.optimize import bisect

from ddfsim.ddf.channel import ChannelRealization, SystemParams, check_slot, draw_gains, phase_two_pairs
from ddfsim.ddf.relay import phi1_vector
from ddfsim.exceptions import ValidationError

logger = logging.getLogger(__name__)

CURVE_VARIANTS = ('infinite', 'finite', 'pareto', 'tx-bound')


def _check_multiplexing(r):
    if not 0 <= r <= 1:
        raise ValidationError('multiplexing gain must lie in [0, 1] (got %r)' % (r,))


def dmt_infinite(r: float) -> float:
    """DMT with unbounded decision granularity: 2 - 2r up to r = 1/2, then (1 - r) / r."""
    _check_multiplexing(r)
    if r <= 0.5:
        return 2.0 - 2.0 * r
    return (1.0 - r) / r


def tx_div_bound(r: float) -> float:
    """Two-antenna MISO bound 2(1 - r)."""
    _check_multiplexing(r)
    return 2.0 * (1.0 - r)


def d_bar(m: int, r: float, M: int) -> float:
    """Exponent of the probability that the relay picks slot m (inf when it never does)."""
    if not 1 <= m <= M:
        raise ValidationError('decision slot %r outside 1..%d' % (m, M))
    if m == M:
        if M == 1:
            # Generic r = 0 value kept; dmt_finite(r, 1) jumps from 2 at r = 0 to 1 - r
            return 1.0 if r <= 0 else 0.0
        return 1.0 - M * r / (M - 1) if r <= (M - 1) / M else 0.0
    if r > m / M:
        return math.inf
    if m == 1:
        return 0.0
    if r <= (m - 1) / M:
        return 1.0 - M * r / (m - 1)
    return 0.0


def d_m_exponent(m: int, r: float, M: int) -> float:
    """Outage exponent at the destination given decision slot m."""
    if not 1 <= m <= M:
        raise ValidationError('decision slot %r outside 1..%d' % (m, M))
    if m == M:
        return 1.0 - r
    if m < M / 2:
        return 2.0 - 2.0 * r
    if r >= 0.5 or m >= M * (1.0 - r):
        return M * (1.0 - r) / m
    return 2.0 - r * M / (M - m)


def dmt_finite(r: float, M: int) -> float:
    """min over m of d_bar(m) + d_m: the DMT for M slots."""
    _check_multiplexing(r)
    if M < 1:
        raise ValidationError('M must be positive')
    return min(d_bar(m, r, M) + d_m_exponent(m, r, M) for m in range(1, M + 1))


def _fraction_sequence(x: float, N: int):
    fractions = [0.5]
    for _ in range(1, N):
        previous = fractions[-1]
        denominator = 2.0 - (1.0 + 1.0 / x) * previous
        if denominator <= 0:
            return None
        fractions.append((1.0 - previous) / denominator)
    if any(not 0 < f < 1 for f in fractions) or any(b <= a for a, b in zip(fractions, fractions[1:])):
        return None
    return fractions


def _fixed_point_gap(x: float, N: int) -> float:
    fractions = _fraction_sequence(x, N)
    return math.nan if fractions is None else fractions[-1] - x


def pareto_fractions(N: int) -> List[float]:
    """
    Decision-time fractions f_1 < ... < f_N of the N-step Pareto rule:
    f_1 = 1/2, f_j = (1 - f_(j-1)) / (2 - (1 + 1/f_N) f_(j-1)), and f_N is
    the fixed point closing the recursion.
    """
    if int(N) != N or N < 1:
        raise ValidationError('number of decision steps must be a positive integer (got %r)' % (N,))
    if N == 1:
        return [0.5]
    grid = np.linspace(1.0 - 1e-9, 0.5 + 1e-9, 20001)
    previous = None
    for x in grid:
        gap = _fixed_point_gap(x, N)
        if math.isnan(gap):
            previous = None
            continue
        if gap == 0:
            return _fraction_sequence(x, N)
        if previous is not None and previous[1] * gap <= 0:
            root = bisect(lambda t: _fixed_point_gap(t, N), x, previous[0], xtol=1e-12)
            return _fraction_sequence(root, N)
        previous = (x, gap)
    raise ValidationError('no Pareto fixed point found for N=%d' % N)


@lru_cache(maxsize=None)
def _last_fraction(N: int) -> float:
    return pareto_fractions(N)[-1]


def pareto_dmt(r: float, N: int) -> float:
    _check_multiplexing(r)
    f_N = _last_fraction(N)
    return 1.0 - r + max(0.0, 1.0 - r / f_N)


@dataclass(frozen=True, eq=False)
class DmtCurve:
    variant: str
    parameter: int
    r: np.ndarray
    d: np.ndarray

    def rows(self):
        for r, d in zip(self.r, self.d):
            yield (float(r), float(d), self.parameter, self.variant)


def dmt_curve(variant: str, r_grid: Sequence[float], parameter: int = 0) -> DmtCurve:
    """`parameter` is M for the finite curve and N for the Pareto curve."""
    functions = {
        'infinite': dmt_infinite,
        'tx-bound': tx_div_bound,
        'finite': lambda r: dmt_finite(r, parameter),
        'pareto': lambda r: pareto_dmt(r, parameter),
    }
    if variant not in functions:
        raise ValidationError('unknown DMT curve %r' % (variant,))
    r_grid = np.asarray(r_grid, dtype=float)
    return DmtCurve(variant, parameter, r_grid, np.array([functions[variant](r) for r in r_grid]))


def msc_mutual_info(m: int, ch: ChannelRealization, params: SystemParams) -> float:
    """Bits per block of the two-phase channel with Gaussian inputs and a perfect relay."""
    check_slot(m, params)
    listening = m * params.T * math.log2(1.0 + abs(ch.g1) ** 2 * params.rho)
    forwarding = (params.M - m) * params.T * math.log2(1.0 + (abs(ch.g1) ** 2 + abs(ch.g2) ** 2) * params.rho)
    return listening + forwarding


def alamouti_mutual_info(m: int, ch: ChannelRealization, params: SystemParams) -> float:
    """
    Mutual information per symbol of the Alamouti-combined channel. Symbols
    left unpaired in phase 2 see g1 alone.
    """
    paired = 2 * phase_two_pairs(m, params).size
    single = params.block_length - paired
    return (single * math.log2(1.0 + abs(ch.g1) ** 2 * params.rho)
            + paired * math.log2(1.0 + (abs(ch.g1) ** 2 + abs(ch.g2) ** 2) * params.rho)) / params.block_length


@dataclass(frozen=True, eq=False)
class OutageEstimate:
    p_out: float
    standard_error: float
    decision_pmf: np.ndarray
    conditional_outage: np.ndarray
    trials: int


def outage_mc(params: SystemParams, trials: int, rng: np.random.Generator) -> OutageEstimate:
    """
    Probability that the DDF mutual information at the phi1 decision slot
    falls below M T R, with the decision-time pmf and the outage probability
    conditioned on each slot.
    """
    if trials < 1:
        raise ValidationError('outage estimate needs at least one trial')
    h, g1, g2 = draw_gains(rng, trials)
    slots = phi1_vector(h, params)
    listening = np.log2(1.0 + np.abs(g1) ** 2 * params.rho)
    forwarding = np.log2(1.0 + (np.abs(g1) ** 2 + np.abs(g2) ** 2) * params.rho)
    info = params.T * (slots * listening + (params.M - slots) * forwarding)
    outage = info < params.block_length * params.R
    counts = np.bincount(slots - 1, minlength=params.M)
    outage_counts = np.bincount(slots - 1, weights=outage.astype(float), minlength=params.M)
    with np.errstate(invalid='ignore', divide='ignore'):
        conditional = np.where(counts > 0, outage_counts / np.maximum(counts, 1), math.nan)
    p_out = float(np.mean(outage))
    logger.debug('outage at %.1f dB: %g over %d trials', params.rho_db, p_out, trials)
    return OutageEstimate(p_out, math.sqrt(p_out * (1.0 - p_out) / trials), counts / trials, conditional, trials)


def decision_time_pmf_closed(params: SystemParams) -> np.ndarray:
    """
    P(phi1 = m) from the Rayleigh law of |h|^2:
    P(phi1 <= m) = exp(-(2^(M R / m) - 1) / rho') for m < M.
    """
    below = np.empty(params.M + 1)
    below[0] = 0.0
    for m in range(1, params.M):
        threshold = (np.exp2(params.M * params.R / m) - 1.0) / params.rho_prime
        below[m] = math.exp(-threshold) if math.isfinite(threshold) else 0.0
    below[params.M] = 1.0
    return np.diff(below)
