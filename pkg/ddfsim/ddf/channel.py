##
# Protocol parameters, fading and noise generation, the transmit/receive
# equations of the single relay channel and the Alamouti-DDF transforms.
##
import logging
from dataclasses import dataclass, replace

import numpy as np

from ddfsim import settings
from ddfsim.exceptions import ContractViolation, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemParams:
    """
    Constants shared by every module.

    Convention: destination noise variance is 1 and the symbol energy E equals
    the linear SNR rho, so rho is the only sweep variable. The relay link runs
    rho_prime_offset_db above rho.
    """
    M: int = settings.DDF_SLOTS
    T: int = settings.DDF_SLOT_LENGTH
    R: float = settings.DDF_RATE
    rho_db: float = 10.0
    rho_prime_offset_db: float = settings.DDF_RELAY_SNR_OFFSET_DB
    seed: int = settings.DDF_SEED

    def __post_init__(self):
        errors = []
        if int(self.M) != self.M or self.M < 1:
            errors.append('M must be a positive integer (got %r)' % (self.M,))
        if int(self.T) != self.T or self.T < 1:
            errors.append('T must be a positive integer (got %r)' % (self.T,))
        if not np.isfinite(self.R) or self.R <= 0:
            errors.append('R must be a positive rate (got %r)' % (self.R,))
        if not np.isfinite(self.rho_db) or not np.isfinite(self.rho_prime_offset_db):
            errors.append('SNR values must be finite')
        if int(self.seed) != self.seed or self.seed < 0:
            errors.append('seed must be a non-negative integer (got %r)' % (self.seed,))
        if errors:
            raise ValidationError(errors)

    @property
    def block_length(self) -> int:
        return int(self.M * self.T)

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def rho_prime(self) -> float:
        return 10.0 ** ((self.rho_db + self.rho_prime_offset_db) / 10.0)

    @property
    def energy(self) -> float:
        return self.rho

    @property
    def sigma_w2(self) -> float:
        return 1.0

    @property
    def sigma_v2(self) -> float:
        return self.energy / self.rho_prime

    def at_snr(self, rho_db: float) -> 'SystemParams':
        return replace(self, rho_db=float(rho_db))


@dataclass(frozen=True)
class ChannelRealization:
    h: complex
    g1: complex
    g2: complex
    sigma_v2: float
    sigma_w2: float

    def __post_init__(self):
        if not self.sigma_v2 > 0 or not self.sigma_w2 > 0:
            raise ContractViolation('noise variances must be positive')


@dataclass(frozen=True, eq=False)
class SignalBlock:
    """A complex sample vector; boundary marks the relay switch (a multiple of T)."""
    samples: np.ndarray
    boundary: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'samples', np.asarray(self.samples, dtype=complex).reshape(-1))

    def __len__(self):
        return self.samples.size

    def prefix(self, length: int) -> 'SignalBlock':
        if length > len(self):
            raise ContractViolation('prefix of length %d requested from a block of %d' % (length, len(self)))
        return SignalBlock(self.samples[:length], min(self.boundary, length))


def complex_gaussian(rng: np.random.Generator, size, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_gains(rng: np.random.Generator, size: int):
    """Independent unit-variance Rayleigh gains (h, g1, g2) for `size` blocks."""
    gains = complex_gaussian(rng, (size, 3), 1.0)
    return gains[:, 0], gains[:, 1], gains[:, 2]


def draw_channel(params: SystemParams, rng: np.random.Generator) -> ChannelRealization:
    h, g1, g2 = complex_gaussian(rng, 3, 1.0)
    return ChannelRealization(complex(h), complex(g1), complex(g2), params.sigma_v2, params.sigma_w2)


def check_slot(m: int, params: SystemParams):
    if int(m) != m or not 1 <= m <= params.M:
        raise ContractViolation('decision slot %r outside 1..%d' % (m, params.M))


def relay_receive(x_s: SignalBlock, m: int, ch: ChannelRealization, rng: np.random.Generator,
                  params: SystemParams, noiseless: bool = False) -> SignalBlock:
    """Signal heard by the relay over the first m slots: y_r = h x_s + v."""
    check_slot(m, params)
    length = m * params.T
    if len(x_s) < length:
        raise ContractViolation('source block of length %d is shorter than %d' % (len(x_s), length))
    noise = complex_gaussian(rng, length, ch.sigma_v2)
    if noiseless:
        noise = np.zeros_like(noise)
    return SignalBlock(ch.h * x_s.samples[:length] + noise, length)


def destination_receive(x_s: SignalBlock, x_r: SignalBlock, m: int, ch: ChannelRealization,
                        rng: np.random.Generator, params: SystemParams, noiseless: bool = False) -> SignalBlock:
    """Signal at the destination: g1 x_s + w while the relay listens, plus g2 x_r afterwards."""
    check_slot(m, params)
    n = params.block_length
    if len(x_s) != n or len(x_r) != n:
        raise ContractViolation('source and relay blocks must both have length %d' % n)
    start = m * params.T
    if np.any(x_r.samples[:start] != 0):
        raise ContractViolation('relay transmits during its listening phase (half-duplex)')
    noise = complex_gaussian(rng, n, ch.sigma_w2)
    if noiseless:
        noise = np.zeros_like(noise)
    return SignalBlock(ch.g1 * x_s.samples + ch.g2 * x_r.samples + noise, start)


def phase_two_pairs(m: int, params: SystemParams) -> np.ndarray:
    """
    First index of every Alamouti pair after slot m.
    With T = 1 an odd phase 2 leaves its last symbol unpaired: the relay stays
    silent on it and the source sends it alone.
    """
    check_slot(m, params)
    start = m * params.T
    length = params.block_length - start
    if length % 2 and params.T != 1:
        raise ContractViolation('phase 2 length %d is odd; Alamouti pairs need an even length' % length)
    return np.arange(start, start + length - length % 2, 2)


def alamouti_map(codewords: np.ndarray, m: int, params: SystemParams) -> np.ndarray:
    """Relay signal for every row of `codewords` (last axis is time)."""
    codewords = np.asarray(codewords, dtype=complex)
    first = phase_two_pairs(m, params)
    relay = np.zeros_like(codewords)
    relay[..., first] = np.conj(codewords[..., first + 1])
    relay[..., first + 1] = -np.conj(codewords[..., first])
    return relay


def alamouti_relay_signal(x_s_hat: SignalBlock, m: int, params: SystemParams) -> SignalBlock:
    if len(x_s_hat) != params.block_length:
        raise ContractViolation('relay codeword must have length %d' % params.block_length)
    return SignalBlock(alamouti_map(x_s_hat.samples, m, params), m * params.T)


def combined_gains(m: int, ch: ChannelRealization, params: SystemParams) -> np.ndarray:
    """Per-symbol gain of the combined parallel channel for decision slot m."""
    gains = np.full(params.block_length, ch.g1, dtype=complex)
    first = phase_two_pairs(m, params)
    gamma = np.sqrt(abs(ch.g1) ** 2 + abs(ch.g2) ** 2)
    gains[first] = gamma
    gains[first + 1] = gamma
    return gains


def alamouti_combine(y: SignalBlock, m: int, ch: ChannelRealization, params: SystemParams) -> SignalBlock:
    """
    Orthogonal combining of every phase-2 pair. The 2x2 pair matrix divided by
    its gain is unitary, so the combined noise keeps the variance of w.
    """
    if len(y) != params.block_length:
        raise ContractViolation('received block must have length %d' % params.block_length)
    first = phase_two_pairs(m, params)
    out = y.samples.copy()
    gamma = np.sqrt(abs(ch.g1) ** 2 + abs(ch.g2) ** 2)
    if first.size and gamma > 0:
        y1 = y.samples[first]
        y2c = np.conj(y.samples[first + 1])
        out[first] = (np.conj(ch.g1) * y1 - ch.g2 * y2c) / gamma
        out[first + 1] = np.conj((np.conj(ch.g2) * y1 + ch.g1 * y2c) / gamma)
    return SignalBlock(out, m * params.T)
