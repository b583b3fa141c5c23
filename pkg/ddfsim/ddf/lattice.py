##
# Rotated QAM codes from the cyclotomic rotation and their mod-lattice
# (coset) version with a dither.
#
# Real expansion convention: a complex vector (x_0, ..., x_{n-1}) maps to
# (Re x_0, Im x_0, Re x_1, Im x_1, ...), and complex matrices follow.
##
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from ddfsim.ddf.channel import SignalBlock
from ddfsim.ddf.decoder import sphere_closest
from ddfsim.exceptions import CodebookError

logger = logging.getLogger(__name__)


def to_real(samples) -> np.ndarray:
    """Interleave real and imaginary parts along the last axis."""
    samples = np.asarray(samples, dtype=complex)
    out = np.empty(samples.shape[:-1] + (2 * samples.shape[-1],))
    out[..., 0::2] = samples.real
    out[..., 1::2] = samples.imag
    return out


def to_complex(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] % 2:
        raise CodebookError('real vector of odd length %d has no complex form' % values.shape[-1])
    return values[..., 0::2] + 1j * values[..., 1::2]


def real_expand(matrix) -> np.ndarray:
    """Real 2p x 2q matrix acting on interleaved vectors like the complex p x q one."""
    matrix = np.asarray(matrix, dtype=complex)
    rows, cols = matrix.shape
    out = np.empty((2 * rows, 2 * cols))
    out[0::2, 0::2] = matrix.real
    out[0::2, 1::2] = -matrix.imag
    out[1::2, 0::2] = matrix.imag
    out[1::2, 1::2] = matrix.real
    return out


def index_to_digits(indices, base: int, width: int) -> np.ndarray:
    """Little-endian base-`base` digits, one row per index."""
    indices = np.asarray(indices, dtype=np.int64)
    powers = base ** np.arange(width, dtype=np.int64)
    return (indices[..., None] // powers) % base


def digits_to_index(digits, base: int) -> int:
    digits = np.asarray(digits, dtype=np.int64)
    return int(digits @ (base ** np.arange(digits.shape[-1], dtype=np.int64)))


@dataclass(frozen=True, eq=False)
class RotationGenerator:
    """Unitary rotation of Z[i]^n with full diversity."""
    n: int
    matrix: np.ndarray

    @property
    def real(self) -> np.ndarray:
        return real_expand(self.matrix)


def build_rotation(n: int) -> RotationGenerator:
    """
    G[j, k] = exp(i pi (4j + 1) k / (2n)) / sqrt(n): a Vandermonde matrix on
    the conjugates of the root of unity exp(i pi / (2n)). Unitary for every n.
    """
    if int(n) != n or n < 1:
        raise CodebookError('rotation dimension must be a positive integer (got %r)' % (n,))
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    matrix = np.exp(1j * np.pi * (4 * j + 1) * k / (2 * n)) / np.sqrt(n)
    return RotationGenerator(int(n), matrix)


@dataclass(frozen=True)
class QamInfoSet:
    """
    Q^2-QAM information vectors b in Z[i]^n, each component with real and
    imaginary parts in {-(Q-1), ..., -1, 1, ..., Q-1} (odd values).
    Message index: little-endian base-Q digits of (b + Q - 1) / 2 in
    interleaved order.
    """
    Q: int
    n: int

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 2 or self.Q % 2:
            raise CodebookError('QAM order Q must be an even integer >= 2 (got %r)' % (self.Q,))
        if int(self.n) != self.n or self.n < 1:
            raise CodebookError('QAM dimension must be a positive integer (got %r)' % (self.n,))

    @property
    def size(self) -> int:
        return self.Q ** (2 * self.n)

    @property
    def symbol_energy(self) -> float:
        """Mean |b_i|^2 over the constellation."""
        return 2.0 * (self.Q ** 2 - 1) / 3.0

    def points(self, indices=None) -> np.ndarray:
        if indices is None:
            indices = np.arange(self.size)
        digits = index_to_digits(indices, self.Q, 2 * self.n)
        return to_complex(2 * digits - (self.Q - 1))

    def point(self, index: int) -> np.ndarray:
        if not 0 <= index < self.size:
            raise CodebookError('message index %r outside 0..%d' % (index, self.size - 1))
        return self.points(index)

    def index_of(self, b) -> int:
        values = to_real(np.asarray(b, dtype=complex).reshape(-1))
        digits = (values + (self.Q - 1)) / 2.0
        if values.size != 2 * self.n or not np.all(np.isin(digits, np.arange(self.Q))):
            raise CodebookError('vector is not a %d-QAM information point' % (self.Q ** 2))
        return digits_to_index(digits.astype(np.int64), self.Q)


def qam_scale(energy: float, info: QamInfoSet) -> float:
    return math.sqrt(energy / info.symbol_energy)


def encode_qam(b, gen: RotationGenerator, energy: float, info: QamInfoSet) -> SignalBlock:
    """Codeword x = scale * G b, scaled to mean symbol energy `energy`."""
    info.index_of(b)
    return SignalBlock(qam_scale(energy, info) * (gen.matrix @ np.asarray(b, dtype=complex)))


@dataclass(frozen=True, eq=False)
class RotatedQamCodebook:
    generator: RotationGenerator
    info: QamInfoSet
    energy: float

    def __post_init__(self):
        if self.generator.n != self.info.n:
            raise CodebookError('rotation and information set dimensions differ')

    @property
    def size(self) -> int:
        return self.info.size

    @property
    def block_length(self) -> int:
        return self.info.n

    @property
    def rate(self) -> float:
        """Bits per channel use."""
        return math.log2(self.size) / self.block_length

    @cached_property
    def codewords(self) -> np.ndarray:
        return qam_scale(self.energy, self.info) * (self.info.points() @ self.generator.matrix.T)

    def encode(self, message: int) -> SignalBlock:
        if not 0 <= message < self.size:
            raise CodebookError('message index %r outside 0..%d' % (message, self.size - 1))
        return SignalBlock(self.codewords[message])


def mod_lattice(y, generator) -> np.ndarray:
    """Reduce y into the Voronoi region of the lattice spanned by `generator`."""
    generator = np.asarray(generator, dtype=float)
    y = np.asarray(y, dtype=float)
    return y - generator @ sphere_closest(generator, y)


@dataclass(frozen=True, eq=False)
class CosetCodebook:
    """
    Nested lattice code Lambda / Q Lambda with Lambda = s * G (real form).
    Messages index the Q^(2n) cosets through the digits of z mod Q; the
    scale s = sqrt(6 E) / Q gives mean symbol energy E for a uniform
    codeword over the Voronoi region of Q Lambda. Q = 1 is the plain
    lattice with a single message.

    Decoders of a shaped code search only the Q^(2n) lattice coefficients
    whose codeword lies in that Voronoi region, one per coset.
    """
    generator: RotationGenerator
    Q: int
    energy: float
    dither: Optional[np.ndarray] = None
    shaped: bool = True

    def __post_init__(self):
        if int(self.Q) != self.Q or self.Q < 1:
            raise CodebookError('coset code needs Q >= 1 (got %r)' % (self.Q,))
        if not self.energy > 0:
            raise CodebookError('codeword energy must be positive')
        dither = np.zeros(2 * self.generator.n) if self.dither is None else np.asarray(self.dither, dtype=float)
        if dither.shape != (2 * self.generator.n,):
            raise CodebookError('dither must have %d real entries' % (2 * self.generator.n))
        object.__setattr__(self, 'dither', dither)

    @property
    def size(self) -> int:
        return self.Q ** (2 * self.generator.n)

    @property
    def block_length(self) -> int:
        return self.generator.n

    @property
    def rate(self) -> float:
        return 2.0 * math.log2(self.Q)

    @cached_property
    def basis(self) -> np.ndarray:
        return math.sqrt(6.0 * self.energy) / self.Q * self.generator.real

    @cached_property
    def sublattice(self) -> np.ndarray:
        return self.Q * self.basis

    def coset_of(self, z) -> int:
        return digits_to_index(np.mod(np.asarray(z, dtype=np.int64), self.Q), self.Q)

    def representative(self, message: int) -> np.ndarray:
        if not 0 <= message < self.size:
            raise CodebookError('message index %r outside 0..%d' % (message, self.size - 1))
        return self.basis @ index_to_digits(message, self.Q, 2 * self.generator.n)

    def codeword(self, message: int) -> np.ndarray:
        """Real codeword (representative - dither) mod Q Lambda."""
        return mod_lattice(self.representative(message) - self.dither, self.sublattice)

    def encode(self, message: int) -> SignalBlock:
        return SignalBlock(to_complex(self.codeword(message)))

    def draw_dither(self, rng: np.random.Generator) -> np.ndarray:
        """
        Uniform over the fundamental parallelepiped of Q Lambda, then reduced:
        still uniform over the Voronoi region since both tile the space.
        """
        point = self.sublattice @ rng.random(2 * self.generator.n)
        return mod_lattice(point, self.sublattice)

    def redither(self, rng: np.random.Generator) -> 'CosetCodebook':
        return replace(self, dither=self.draw_dither(rng))

    def coefficient_box(self, dither: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        """
        Per-coordinate (lower, upper) bounds on z such that basis z - dither
        is a codeword, or None for an unshaped or single-message code. The
        codeword coefficients z - d, d = basis^-1 dither, fill (-Q/2, Q/2]
        since mod_lattice breaks ties towards the smaller multiple of Q.
        """
        if not self.shaped or self.Q == 1:
            return None
        dither = self.dither if dither is None else np.asarray(dither, dtype=float)
        offset = np.linalg.solve(self.basis, dither)
        lower = np.floor(offset - self.Q / 2.0).astype(np.int64) + 1
        return np.column_stack([lower, lower + self.Q - 1])


def coset_encode(message: int, codebook: CosetCodebook,
                 rng: Optional[np.random.Generator] = None) -> Tuple[SignalBlock, CosetCodebook]:
    """
    Codeword of `message` and the codebook it was drawn from. With `rng` the
    codebook carries a fresh dither, which the receivers decode against.
    """
    if rng is not None:
        codebook = codebook.redither(rng)
    return codebook.encode(message), codebook
