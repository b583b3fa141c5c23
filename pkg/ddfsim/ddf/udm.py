##
# Finite field arithmetic and the Hasse-derivative construction of
# universally decodable matrices (UDM), plus the permutation code that maps
# UDM images to PAM levels.
##
import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np

from ddfsim.ddf.channel import SignalBlock
from ddfsim.ddf.lattice import index_to_digits
from ddfsim.exceptions import CodebookError

logger = logging.getLogger(__name__)


def _prime_power(q):
    if int(q) != q or q < 2:
        raise CodebookError('field size must be an integer >= 2 (got %r)' % (q,))
    p = next(d for d in range(2, q + 1) if q % d == 0)
    k, rest = 0, q
    while rest % p == 0:
        rest //= p
        k += 1
    if rest != 1:
        raise CodebookError('field size %d is not a prime power' % q)
    return p, k


def _poly_mod(a, m, p):
    """Remainder of a by the monic m over GF(p); coefficients low to high."""
    a = list(a)
    while len(a) >= len(m):
        lead = a[-1]
        shift = len(a) - len(m)
        for i, c in enumerate(m):
            a[shift + i] = (a[shift + i] - lead * c) % p
        a.pop()
    return a


def _is_irreducible(poly, p):
    degree = len(poly) - 1
    for d in range(1, degree // 2 + 1):
        for lower in itertools.product(range(p), repeat=d):
            if any(_poly_mod(poly, list(lower) + [1], p)):
                continue
            return False
    return True


def _modulus(p, k):
    if k == 1:
        return [0, 1]
    for value in range(p ** k):
        lower = [(value // p ** i) % p for i in range(k)]
        if lower[0] and _is_irreducible(lower + [1], p):
            return lower + [1]
    raise CodebookError('no irreducible polynomial of degree %d over GF(%d)' % (k, p))


class GaloisField(object):
    """
    GF(q) with q = p^k. Element v stands for the polynomial with base-p digits
    of v as coefficients (constant term first) reduced modulo the smallest
    monic irreducible polynomial of degree k, so the prime subfield is 0..p-1.
    """

    def __init__(self, q):
        self.p, self.k = _prime_power(q)
        self.q = q
        self.modulus = _modulus(self.p, self.k)
        digits = [[(v // self.p ** i) % self.p for i in range(self.k)] for v in range(q)]
        weights = [self.p ** i for i in range(self.k)]

        def value(coefficients):
            return sum(c * w for c, w in zip(coefficients, weights))

        self.add = np.zeros((q, q), dtype=np.int64)
        self.mul = np.zeros((q, q), dtype=np.int64)
        for a in range(q):
            for b in range(q):
                self.add[a, b] = value([(x + y) % self.p for x, y in zip(digits[a], digits[b])])
                product = [0] * (2 * self.k - 1)
                for i, x in enumerate(digits[a]):
                    for j, y in enumerate(digits[b]):
                        product[i + j] = (product[i + j] + x * y) % self.p
                self.mul[a, b] = value(_poly_mod(product, self.modulus, self.p))
        self.neg = np.array([int(np.flatnonzero(self.add[a] == 0)[0]) for a in range(q)])
        self.inv = np.zeros(q, dtype=np.int64)
        for a in range(1, q):
            self.inv[a] = int(np.flatnonzero(self.mul[a] == 1)[0])

    def check(self, values):
        values = np.asarray(values, dtype=np.int64)
        if np.any(values < 0) or np.any(values >= self.q):
            raise CodebookError('values outside GF(%d)' % self.q)
        return values

    def power(self, a, exponent):
        result = 1
        for _ in range(exponent):
            result = self.mul[result, a]
        return int(result)

    def matmul(self, A, B):
        A, B = self.check(A), self.check(B)
        products = self.mul[A[:, :, None], B[None, :, :]]
        total = products[:, 0, :]
        for k in range(1, A.shape[1]):
            total = self.add[total, products[:, k, :]]
        return total

    def matvec(self, A, u):
        return self.matmul(A, np.asarray(u).reshape(-1, 1))[:, 0]

    def rank(self, A):
        A = self.check(A).copy()
        rows, cols = A.shape
        rank = 0
        for col in range(cols):
            pivot = next((r for r in range(rank, rows) if A[r, col]), None)
            if pivot is None:
                continue
            A[[rank, pivot]] = A[[pivot, rank]]
            A[rank] = self.mul[self.inv[A[rank, col]], A[rank]]
            for r in range(rows):
                if r != rank and A[r, col]:
                    A[r] = self.add[A[r], self.neg[self.mul[A[r, col], A[rank]]]]
            rank += 1
            if rank == rows:
                break
        return rank


@lru_cache(maxsize=None)
def galois_field(q: int) -> GaloisField:
    return GaloisField(q)


@dataclass(frozen=True)
class GfElement:
    value: int
    q: int

    def __post_init__(self):
        galois_field(self.q).check(self.value)

    def _other(self, other):
        if not isinstance(other, GfElement) or other.q != self.q:
            raise CodebookError('cannot combine elements of different fields')
        return other.value

    def __add__(self, other):
        return GfElement(int(galois_field(self.q).add[self.value, self._other(other)]), self.q)

    def __sub__(self, other):
        field = galois_field(self.q)
        return GfElement(int(field.add[self.value, field.neg[self._other(other)]]), self.q)

    def __mul__(self, other):
        return GfElement(int(galois_field(self.q).mul[self.value, self._other(other)]), self.q)

    def __neg__(self):
        return GfElement(int(galois_field(self.q).neg[self.value]), self.q)

    def inverse(self):
        if self.value == 0:
            raise ZeroDivisionError('zero has no inverse in GF(%d)' % self.q)
        return GfElement(int(galois_field(self.q).inv[self.value]), self.q)


def gf_arith(a: GfElement, b: Optional[GfElement], op: str) -> GfElement:
    """'+', '-' and '*' combine a and b; 'inv' inverts a and ignores b."""
    if op == 'inv':
        return a.inverse()
    operations = {'+': GfElement.__add__, '-': GfElement.__sub__, '*': GfElement.__mul__}
    if op not in operations:
        raise ValueError('unknown field operation %r' % (op,))
    return operations[op](a, b)


@dataclass(frozen=True, eq=False)
class UdmSet:
    L: int
    n: int
    q: int
    matrices: Tuple[np.ndarray, ...]

    def format_grid(self) -> str:
        blocks = []
        for index, matrix in enumerate(self.matrices):
            rows = '\n'.join(' '.join(str(int(v)) for v in row) for row in matrix)
            blocks.append('A%d\n%s' % (index, rows))
        return '\n\n'.join(blocks) + '\n'


def build_udm(L: int, n: int, q: int) -> UdmSet:
    """
    L matrices of size n x n over GF(q), one per point of the projective line:
    the point at infinity gives the anti-identity, the point 0 the identity,
    and every other point beta the Hasse-derivative evaluation matrix
    A[k, j] = C(j, k) beta^(j - k). At most q + 1 points exist.
    """
    if int(L) != L or L < 1 or int(n) != n or n < 1:
        raise CodebookError('UDM needs positive L and n (got L=%r, n=%r)' % (L, n))
    field = galois_field(q)
    if L > q + 1:
        raise CodebookError('at most q + 1 = %d universally decodable matrices exist, %d requested' % (q + 1, L))
    matrices = [np.eye(n, dtype=np.int64)[::-1].copy(), np.eye(n, dtype=np.int64)]
    for beta in range(1, q):
        matrix = np.zeros((n, n), dtype=np.int64)
        for k in range(n):
            for j in range(k, n):
                matrix[k, j] = field.mul[math.comb(j, k) % field.p, field.power(beta, j - k)]
        matrices.append(matrix)
    return UdmSet(int(L), int(n), q, tuple(matrices[:L]))


def row_count_tuples(L: int, n: int, exhaustive: bool = False):
    for counts in itertools.product(range(n + 1), repeat=L):
        total = sum(counts)
        if total == n or (exhaustive and total > n):
            yield counts


def udm_verify(u: UdmSet, exhaustive: bool = False) -> bool:
    """
    True when every stack of the first k_l rows of each A_l with sum k_l = n
    (or >= n when exhaustive) has full column rank n.
    """
    field = galois_field(u.q)
    for counts in row_count_tuples(u.L, u.n, exhaustive):
        stack = np.vstack([matrix[:k] for matrix, k in zip(u.matrices, counts) if k])
        if field.rank(stack) < u.n:
            logger.debug('UDM rank loss for row counts %s', counts)
            return False
    return True


def pam_scale(energy: float, levels: int) -> float:
    """Scale giving mean |x|^2 = energy when real and imaginary parts are uniform PAM."""
    return math.sqrt(energy / (2.0 * (levels ** 2 - 1) / 3.0))


def _pam_levels(images, q):
    weights = q ** np.arange(images.shape[-1], dtype=np.int64)
    return 2 * (images @ weights) - (q ** images.shape[-1] - 1)


def encode_permutation(u_I, u_Q, udm: UdmSet, energy: float) -> SignalBlock:
    """
    Symbol l carries A_l u_I and A_l u_Q, each read as a base-q integer and
    mapped to one of q^n PAM levels.
    """
    field = galois_field(udm.q)
    u_I = field.check(np.asarray(u_I).reshape(-1))
    u_Q = field.check(np.asarray(u_Q).reshape(-1))
    if u_I.size != udm.n or u_Q.size != udm.n:
        raise CodebookError('information vectors must have %d entries' % udm.n)
    images_I = np.array([field.matvec(matrix, u_I) for matrix in udm.matrices])
    images_Q = np.array([field.matvec(matrix, u_Q) for matrix in udm.matrices])
    scale = pam_scale(energy, udm.q ** udm.n)
    return SignalBlock(scale * (_pam_levels(images_I, udm.q) + 1j * _pam_levels(images_Q, udm.q)))


@dataclass(frozen=True, eq=False)
class UdmCodebook:
    """
    Message index: the low q^n part selects u_I, the high part u_Q, each by
    its little-endian base-q digits.
    """
    udm: UdmSet
    energy: float

    @property
    def size(self) -> int:
        return self.udm.q ** (2 * self.udm.n)

    @property
    def block_length(self) -> int:
        return self.udm.L

    @property
    def rate(self) -> float:
        return 2 * self.udm.n * math.log2(self.udm.q) / self.udm.L

    def split(self, message: int):
        if not 0 <= message < self.size:
            raise CodebookError('message index %r outside 0..%d' % (message, self.size - 1))
        half = self.udm.q ** self.udm.n
        return (index_to_digits(message % half, self.udm.q, self.udm.n),
                index_to_digits(message // half, self.udm.q, self.udm.n))

    @cached_property
    def codewords(self) -> np.ndarray:
        field = galois_field(self.udm.q)
        half = self.udm.q ** self.udm.n
        vectors = index_to_digits(np.arange(half), self.udm.q, self.udm.n)
        levels = np.stack([_pam_levels(field.matmul(vectors, matrix.T), self.udm.q)
                           for matrix in self.udm.matrices], axis=1)
        scale = pam_scale(self.energy, half)
        messages = np.arange(self.size)
        return scale * (levels[messages % half] + 1j * levels[messages // half])

    def encode(self, message: int) -> SignalBlock:
        if not 0 <= message < self.size:
            raise CodebookError('message index %r outside 0..%d' % (message, self.size - 1))
        return SignalBlock(self.codewords[message])
