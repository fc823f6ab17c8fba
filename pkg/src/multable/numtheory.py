"""Shared number-theoretic primitives.

Bit vectors, a smallest-prime-factor table, divisor-pair lists, the dyadic
divisor count tau_plus and prime iteration.  The numba kernels defined here
are reused by the exact counting modules.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numba as nb
import numpy as np

from .errors import CapacityError, ContractError, DomainError

WORD_BITS = 64
_ONE = np.uint64(1)


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@nb.njit(cache=True, nogil=True)
def popcount_words(words, nwords):
    total = 0
    for w in range(nwords):
        total += popcount64(words[w])
    return total


@nb.njit(cache=True, nogil=True)
def popcount_and_clear(words, nwords):
    total = 0
    for w in range(nwords):
        x = words[w]
        if x:
            total += popcount64(x)
            words[w] = 0
    return total


@nb.njit(cache=True, nogil=True)
def test_and_set(words, index):
    """Set bit ``index``; return 1 on a 0->1 transition, else 0."""
    w = index >> 6
    b = np.uint64(1) << np.uint64(index & 63)
    x = words[w]
    if x & b:
        return 0
    words[w] = x | b
    return 1


@nb.njit(cache=True)
def _spf_sieve(limit):
    spf = np.zeros(limit + 1, dtype=np.int32)
    if limit >= 1:
        spf[1] = 1
    for p in range(2, limit + 1):
        if spf[p] == 0:
            spf[p] = p
            if p * p <= limit:
                for m in range(p * p, limit + 1, p):
                    if spf[m] == 0:
                        spf[m] = p
    return spf


@nb.njit(cache=True, nogil=True)
def factor_into(n, spf, primes, exps):
    """Write the factorization of n into (primes, exps); return its length."""
    count = 0
    while n > 1:
        p = spf[n]
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        primes[count] = p
        exps[count] = e
        count += 1
    return count


@nb.njit(cache=True, nogil=True)
def small_divisors_into(n, spf, out, primes, exps):
    """Sorted divisors d of n with d*d <= n written to ``out``; returns count."""
    nf = factor_into(n, spf, primes, exps)
    cnt = 1
    out[0] = 1
    for t in range(nf):
        p = primes[t]
        base = cnt
        pk = 1
        for _ in range(exps[t]):
            pk *= p
            for s in range(base):
                d = out[s] * pk
                if d * d <= n:
                    out[cnt] = d
                    cnt += 1
    out[:cnt].sort()
    return cnt


# --------------------------------------------------------------------------
# BitVector
# --------------------------------------------------------------------------

class BitVector:
    """Fixed-length bit array backed by packed 64-bit words.

    ``weight`` is a running Hamming weight kept up to date by
    :meth:`set_and_report`.  Kernels that write ``words`` directly must call
    :meth:`invalidate_weight` afterwards.
    """

    __slots__ = ("length", "words", "_weight")

    def __init__(self, length: int):
        if length < 0:
            raise ValueError("length must be non-negative")
        self.length = int(length)
        self.words = np.zeros((self.length + WORD_BITS - 1) // WORD_BITS + 1, dtype=np.uint64)
        self._weight: int | None = 0

    def __len__(self) -> int:
        return self.length

    def _check(self, index: int) -> None:
        if not 0 <= index < self.length:
            raise IndexError(f"bit index {index} out of range for length {self.length}")

    def get(self, index: int) -> bool:
        self._check(index)
        return bool((int(self.words[index >> 6]) >> (index & 63)) & 1)

    def set_and_report(self, index: int) -> bool:
        """Set bit ``index`` and return whether it was already set."""
        self._check(index)
        w, b = index >> 6, 1 << (index & 63)
        old = int(self.words[w])
        if old & b:
            return True
        self.words[w] = np.uint64(old | b)
        if self._weight is not None:
            self._weight += 1
        return False

    @property
    def weight(self) -> int:
        if self._weight is None:
            self._weight = self.popcount()
        return self._weight

    def popcount(self) -> int:
        """Hamming weight by a full rescan of the words."""
        return int(popcount_words(self.words, self.words.shape[0]))

    def invalidate_weight(self) -> None:
        self._weight = None

    def reset(self) -> None:
        self.words[:] = 0
        self._weight = 0

    def is_zero(self) -> bool:
        return not self.words.any()


# --------------------------------------------------------------------------
# Smallest-prime-factor table
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpfTable:
    """spf[k] is the smallest prime factor of k for 2 <= k <= limit."""

    limit: int
    spf: np.ndarray

    @classmethod
    def build(cls, limit: int) -> "SpfTable":
        if limit < 1:
            raise ValueError("limit must be at least 1")
        arr = _spf_sieve(int(limit))
        arr.setflags(write=False)
        return cls(int(limit), arr)

    def check(self, n: int) -> None:
        if n > self.limit:
            raise CapacityError(f"{n} exceeds the spf table limit {self.limit}")

    def is_prime(self, n: int) -> bool:
        self.check(n)
        return n >= 2 and int(self.spf[n]) == n

    def factorize(self, n: int) -> List[Tuple[int, int]]:
        if n < 1:
            raise DomainError("factorize needs n >= 1")
        self.check(n)
        out = []
        spf = self.spf
        while n > 1:
            p = int(spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out


_spf_lock = threading.Lock()
_spf_cache: SpfTable | None = None


def spf_table(limit: int) -> SpfTable:
    """Process-wide table covering at least ``limit``; rebuilt only to grow."""
    global _spf_cache
    with _spf_lock:
        if _spf_cache is None or _spf_cache.limit < limit:
            _spf_cache = SpfTable.build(max(int(limit), 1 << 16))
        return _spf_cache


# --------------------------------------------------------------------------
# Divisor pairs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DivisorPairList:
    """Ordered pairs (d, n // d) over divisors d <= sqrt(n).

    Construction validates ordering and products; completeness (every small
    divisor present) is a separate check since incomplete lists are
    meaningful inputs for lower bounds.
    """

    n: int
    pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        pairs = self.pairs
        if not pairs or pairs[0] != (1, self.n):
            raise ContractError("divisor pair list must start with (1, n)")
        prev = 0
        for small, large in pairs:
            if small <= prev:
                raise ContractError("small divisors must be strictly increasing")
            if small * large != self.n or small > large:
                raise ContractError(f"({small}, {large}) is not a divisor pair of {self.n}")
            prev = small

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(self.pairs)

    def __getitem__(self, k):
        return self.pairs[k]

    @property
    def smalls(self) -> np.ndarray:
        return np.array([d for d, _ in self.pairs], dtype=np.int64)

    def is_complete(self) -> bool:
        n = self.n
        expected = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
        return expected == [d for d, _ in self.pairs]

    def without(self, small: int) -> "DivisorPairList":
        """Copy with the pair whose small member is ``small`` removed."""
        if small == 1:
            raise ContractError("the pair (1, n) cannot be removed")
        return DivisorPairList(self.n, tuple(p for p in self.pairs if p[0] != small))


def divisor_pairs(n: int, spf: SpfTable) -> DivisorPairList:
    if n < 1:
        raise DomainError("divisor_pairs needs n >= 1")
    spf.check(n)
    smalls = [1]
    for p, e in spf.factorize(n):
        smalls = [d * p**k for d in smalls for k in range(e + 1)]
    smalls = sorted(d for d in smalls if d * d <= n)
    return DivisorPairList(n, tuple((d, n // d) for d in smalls))


def divisors(n: int, spf: SpfTable) -> List[int]:
    out = [1]
    for p, e in spf.factorize(n):
        out = [d * p**k for d in out for k in range(e + 1)]
    return sorted(out)


def tau_plus(n: int, spf: SpfTable) -> int:
    """Number of k (k >= -1) with a divisor of n in (2**k, 2**(k+1)]."""
    if n < 1:
        raise DomainError("tau_plus needs n >= 1")
    spf.check(n)
    # d in (2^k, 2^(k+1)]  <=>  k = bitlen(d - 1) - 1
    return len({(d - 1).bit_length() - 1 for d in divisors(n, spf)})


def primes_in(lo: int, hi: int, spf: SpfTable) -> List[int]:
    if lo > hi:
        raise ValueError("primes_in needs lo <= hi")
    spf.check(hi)
    lo = max(lo, 2)
    if lo > hi:
        return []
    idx = np.arange(lo, hi + 1, dtype=np.int64)
    return [int(p) for p in idx[spf.spf[lo:hi + 1] == idx]]


def largest_prime_factor(n: int, spf: SpfTable) -> int:
    if n < 2:
        raise DomainError("largest_prime_factor needs n >= 2")
    return spf.factorize(n)[-1][0]


def divisor_count(factors: Sequence[Tuple[int, int]]) -> int:
    out = 1
    for _, e in factors:
        out *= e + 1
    return out
