"""Direct construction of every table product in a bit array.

``m_direct`` holds all n^2 bits at once; ``m_direct_segmented`` sweeps the
product range in word-aligned segments so memory stays at one segment per
worker.  ``brute_force_m`` is a set-based oracle for tests.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import CapacityError, DomainError
from .numtheory import WORD_BITS, popcount_and_clear

#: bits allowed for the unsegmented bit array (1 GiB)
DIRECT_MEMORY_BITS = 1 << 33
BRUTE_FORCE_LIMIT = 10_000


@nb.njit(cache=True, nogil=True)
def _sweep_segments(n, seg_bits, first, last, words):
    """Count set bits over segments [first, last) of the product range.

    Bit q of the range stands for the product q + 1.  Each row i keeps a
    pointer to its next product so no division happens inside the sweep.
    """
    total_bits = n * n
    lo0 = first * seg_bits
    nxt = np.empty(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        # first column j >= i with i*j - 1 >= lo0
        j = (lo0 + i) // i
        if j < i:
            j = i
        nxt[i] = i * j - 1
    ilo = 1
    total = 0
    for s in range(first, last):
        lo = s * seg_bits
        hi = min(lo + seg_bits, total_bits)
        if lo >= hi:
            break
        while ilo <= n and ilo * n - 1 < lo:
            ilo += 1
        i = ilo
        while i <= n and i * i - 1 < hi:
            q = nxt[i]
            stop = min(i * n, hi)
            if q < stop:
                q -= lo
                stop -= lo
                while q < stop:
                    words[q >> 6] |= np.uint64(1) << np.uint64(q & 63)
                    q += i
                nxt[i] = q + lo
            i += 1
        total += popcount_and_clear(words, (hi - lo + 63) >> 6)
    return total


def brute_force_m(n: int) -> int:
    """Distinct products of the n x n table via a Python set."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"brute force is limited to n <= {BRUTE_FORCE_LIMIT}")
    return len({i * j for i in range(1, n + 1) for j in range(i, n + 1)})


def m_direct(n: int, memory_bits: int = DIRECT_MEMORY_BITS) -> int:
    """M(n) from a single bit array of n^2 bits, iterating j from i."""
    if n < 1:
        raise DomainError("m_direct needs n >= 1")
    if n * n > memory_bits:
        raise CapacityError(
            f"n^2 = {n * n} bits exceeds the budget of {memory_bits}; use the segmented variant")
    words = np.zeros((n * n + WORD_BITS - 1) // WORD_BITS + 1, dtype=np.uint64)
    return int(_sweep_segments(n, words.shape[0] * WORD_BITS, 0, 1, words))


@dataclass(frozen=True)
class SegmentPlan:
    n: int
    segment_bits: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.segment_bits % WORD_BITS:
            raise ValueError("segment_bits must be a multiple of the word size")
        if self.segment_bits < self.n:
            raise ValueError("segment_bits must be at least n")

    @property
    def segments(self) -> int:
        return -(-self.n * self.n // self.segment_bits)

    @classmethod
    def default(cls, n: int) -> "SegmentPlan":
        # 8n bits keeps the per-row overhead small while segments stay cache resident
        bits = max(1 << 16, 1 << (8 * n - 1).bit_length())
        bits = min(bits, max(WORD_BITS, -(-n * n // WORD_BITS) * WORD_BITS))
        return cls(n, max(bits, -(-n // WORD_BITS) * WORD_BITS))


def m_direct_segmented(plan: SegmentPlan, workers: int = 1) -> int:
    """M(n) with per-worker segment buffers, summed over disjoint segments."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    nseg = plan.segments
    nwords = plan.segment_bits // WORD_BITS + 1
    if workers == 1:
        words = np.zeros(nwords, dtype=np.uint64)
        return int(_sweep_segments(plan.n, plan.segment_bits, 0, nseg, words))

    # low segments are denser, so hand out more blocks than workers
    nblocks = min(nseg, 8 * workers)
    edges = [nseg * b // nblocks for b in range(nblocks + 1)]

    def run(b):
        words = np.zeros(nwords, dtype=np.uint64)
        return int(_sweep_segments(plan.n, plan.segment_bits, edges[b], edges[b + 1], words))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(run, range(nblocks)))


def m_exact_direct(n: int, workers: int = 1, segment_bits: int | None = None) -> int:
    """Dispatch to the single-array or segmented variant depending on size."""
    if segment_bits is None and n * n <= (1 << 26):
        return m_direct(n)
    plan = SegmentPlan(n, segment_bits) if segment_bits else SegmentPlan.default(n)
    return m_direct_segmented(plan, workers)

