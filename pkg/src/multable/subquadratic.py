"""Subquadratic tabulation of delta(k) via chains over primes.

For a fixed multiplier m and primes q > m the small divisors of mq are
exactly the divisors of m, so the shapes for m*p and m*q differ only by
stretching each rectangle from c*p to c*q columns (c = m / d).  A chain
keeps one bit vector for m and walks q upward, marking just the new
strips.  Every k <= n_max is handled by one of three paths:

* smooth    -- largest prime factor q <= B: plain marking per k;
* chain     -- k = m*q with q prime and q > max(B, m);
* fallback  -- the rest (q <= m, e.g. q^2 | k): plain marking per k.

B = floor(L(n_max) ** gamma) with L(n) = exp(sqrt(log n * log log n)).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numba as nb
import numpy as np

from .errors import ContractError, DomainError
from .incremental import MAX_SMALL_DIVISORS, WHEELS, _delta_any
from .numtheory import BitVector, SpfTable, divisors, popcount_words, small_divisors_into, spf_table

GAMMA = 1 / math.sqrt(2)

PATH_SMOOTH = 1
PATH_CHAIN = 2
PATH_FALLBACK = 3


def l_function(n) -> float:
    """exp(sqrt(log n * log log n)) with natural logarithms."""
    if n <= 15:
        raise DomainError("l_function needs n >= 16")
    ln = math.log(n)
    return math.exp(math.sqrt(ln * math.log(ln)))


@dataclass(frozen=True)
class SmoothSplit:
    n: int
    gamma: float = GAMMA

    @property
    def L(self) -> float:
        return l_function(self.n)

    @property
    def B(self) -> int:
        return int(math.floor(self.L ** self.gamma))

    @classmethod
    def for_range(cls, n_max: int, gamma: float | None = None) -> "SmoothSplit | None":
        """Split for tabulating up to n_max, or None when n_max is too small
        for L to be defined (then every k goes through plain marking)."""
        if n_max < 16:
            return None
        return cls(n_max, GAMMA if gamma is None else gamma)


@dataclass(frozen=True)
class ChainSpec:
    m: int
    q_start: int
    Q: int
    divisors_of_m: Tuple[int, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ContractError("chain multiplier must be positive")
        if self.q_start <= self.m:
            raise ContractError(f"chain primes must exceed m={self.m}")
        if self.divisors_of_m[0] != 1 or self.divisors_of_m[-1] != self.m:
            raise ContractError("divisors_of_m must run from 1 to m")

    @classmethod
    def build(cls, m: int, n: int, B: int = 0, spf: SpfTable | None = None) -> "ChainSpec | None":
        """Chain for m over primes max(B, m) < q <= n // m; None if empty."""
        spf = spf or spf_table(max(n // max(m, 1), m, 2))
        Q_bound = n // m
        qs = [q for q in range(max(B, m) + 1, Q_bound + 1) if spf.is_prime(q)]
        if not qs:
            return None
        return cls(m, qs[0], qs[-1], tuple(divisors(m, spf)))

    def primes(self, spf: SpfTable) -> list[int]:
        return [q for q in range(self.q_start, self.Q + 1) if spf.is_prime(q)]


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _mark_shape(n, smalls, l, words):
    """Mark the shape of n (no clearing); returns cells visited."""
    if l <= 1:
        return 0
    k = 0
    cells = 0
    for i in range(1, smalls[l - 1]):
        if i == smalls[k]:
            k += 1
        b = n // smalls[k]
        p = i * i
        for _ in range(i, b):
            words[p >> 6] |= np.uint64(1) << np.uint64(p & 63)
            p += i
        if b > i:
            cells += b - i
    return cells


@nb.njit(cache=True, nogil=True)
def _chain_step(m, smalls, l, p, q, words):
    """Stretch the shape of m*p to m*q.  Returns (new bits, cells visited)."""
    new = 0
    cells = 0
    for k in range(1, l):
        c = m // smalls[k]
        jhi = c * q
        for i in range(smalls[k - 1], smalls[k]):
            j = c * p
            if j < i:
                j = i
            if j >= jhi:
                continue
            x = i * j
            for _ in range(j, jhi):
                w = x >> 6
                bit = np.uint64(1) << np.uint64(x & 63)
                old = words[w]
                if not old & bit:
                    words[w] = old | bit
                    new += 1
                x += i
            cells += jhi - j
    return new, cells


@nb.njit(cache=True, nogil=True)
def _run_chain(m, qs, spf, words, smalls, primes, exps, out, lo, tally):
    """Walk the chain of m over the ascending primes ``qs``.

    Writes delta(m*q) to out[m*q - lo]; returns cells visited.  The bit
    vector is left zeroed.
    """
    if qs.shape[0] == 0:
        return 0
    if m == 1:
        for t in range(qs.shape[0]):
            out[qs[t] - lo] = 0
            tally[qs[t] - lo] += 1
        return 0
    q0 = qs[0]
    l = small_divisors_into(m * q0, spf, smalls, primes, exps)
    cells = _mark_shape(m * q0, smalls, l, words)
    top = m * qs[qs.shape[0] - 1]
    weight = popcount_words(words, (m * q0 >> 6) + 1)
    out[m * q0 - lo] = weight
    tally[m * q0 - lo] += 1
    for t in range(1, qs.shape[0]):
        new, c = _chain_step(m, smalls, l, qs[t - 1], qs[t], words)
        weight += new
        cells += c
        out[m * qs[t] - lo] = weight
        tally[m * qs[t] - lo] += 1
    for w in range((top >> 6) + 1):
        words[w] = 0
    return cells


@nb.njit(cache=True, nogil=True)
def _chains_block(ms, all_primes, B, lo, hi, spf, out, tally):
    """Run the chains for the multipliers in ``ms`` restricted to [lo, hi)."""
    words = np.zeros((hi >> 6) + 2, dtype=np.uint64)
    smalls = np.empty(MAX_SMALL_DIVISORS, dtype=np.int64)
    primes = np.empty(64, dtype=np.int64)
    exps = np.empty(64, dtype=np.int64)
    cells = 0
    for t in range(ms.shape[0]):
        m = ms[t]
        qmin = max(B, m) + 1
        qa = (lo + m - 1) // m
        if qa < qmin:
            qa = qmin
        qb = (hi - 1) // m
        if qb < qa:
            continue
        a = np.searchsorted(all_primes, qa)
        b = np.searchsorted(all_primes, qb, side="right")
        cells += _run_chain(m, all_primes[a:b], spf, words, smalls, primes, exps, out, lo, tally)
    return cells


@nb.njit(cache=True, nogil=True)
def _classify_block(lo, hi, B, spf, paths):
    """paths[k - lo] = PATH_* for each k in [lo, hi)."""
    for k in range(lo, hi):
        if k < 2:
            paths[k - lo] = 1
            continue
        x = k
        q = 1
        while x > 1:
            q = spf[x]
            x //= q
        if q <= B:
            paths[k - lo] = 1
        elif q > k // q:
            paths[k - lo] = 2
        else:
            paths[k - lo] = 3


@nb.njit(cache=True, nogil=True)
def _delta_list(ks, lo, spf, w, out, tally):
    """delta(k) for each k in ``ks`` by plain or wheel marking; returns cells."""
    hi = 2
    for t in range(ks.shape[0]):
        if ks[t] + 1 > hi:
            hi = ks[t] + 1
    ww = max(w, 1)
    words = np.zeros(((ww * (hi // ww + 2)) >> 6) + 2, dtype=np.uint64)
    smalls = np.empty(MAX_SMALL_DIVISORS, dtype=np.int64)
    primes = np.empty(64, dtype=np.int64)
    exps = np.empty(64, dtype=np.int64)
    C = np.zeros(ww, dtype=np.int64)
    cells = 0
    for t in range(ks.shape[0]):
        k = ks[t]
        if k <= 1:
            out[k - lo] = 0
        else:
            l = small_divisors_into(k, spf, smalls, primes, exps)
            d, c = _delta_any(k, smalls, l, w, words, C)
            out[k - lo] = d
            cells += c
        tally[k - lo] += 1
    return cells


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

def chain_start(spec: ChainSpec, p: int, length: int | None = None) -> tuple[BitVector, int]:
    """Bit vector holding the shape of m*p, and its weight delta(m*p).

    For a prime p > m the small divisors of m*p are those of m, so the
    vector can be stretched along the chain with :func:`delta_chain_step`.
    """
    m = spec.m
    if m > 1 and p <= m:
        raise ContractError(f"chain prime p={p} must exceed m={m}")
    A = BitVector(length or m * spec.Q + 1)
    if m * p > A.length:
        raise ContractError(f"bit vector of length {A.length} cannot hold {m * p}")
    smalls = np.array(spec.divisors_of_m, dtype=np.int64)
    if m > 1:
        _mark_shape(m * p, smalls, smalls.shape[0], A.words)
    A.invalidate_weight()
    return A, A.popcount()


def delta_chain_step(A: BitVector, weight: int, spec: ChainSpec, p: int, q: int) -> int:
    """Advance a chain from delta(m*p) (held in A) to delta(m*q)."""
    m = spec.m
    if m > 1 and p <= m:
        raise ContractError(f"chain prime p={p} must exceed m={m}")
    if q < p:
        raise ContractError(f"chain must advance: q={q} < p={p}")
    if m * q > A.length:
        raise ContractError(f"bit vector of length {A.length} cannot hold {m * q}")
    smalls = np.array(spec.divisors_of_m, dtype=np.int64)
    new, _ = _chain_step(m, smalls, smalls.shape[0], p, q, A.words)
    A.invalidate_weight()
    return weight + int(new)


def run_chain(spec: ChainSpec, sink: Callable[[int, int], None], spf: SpfTable | None = None) -> int:
    """Emit (m*q, delta(m*q)) to ``sink`` for every prime of the chain."""
    spf = spf or spf_table(spec.m * spec.Q)
    qs = np.array(spec.primes(spf), dtype=np.int64)
    if qs.size == 0:
        return 0
    lo = spec.m * int(qs[0])
    hi = spec.m * int(qs[-1]) + 1
    out = np.zeros(hi - lo, dtype=np.int64)
    tally = np.zeros(hi - lo, dtype=np.int8)
    words = np.zeros((hi >> 6) + 2, dtype=np.uint64)
    smalls = np.empty(MAX_SMALL_DIVISORS, dtype=np.int64)
    scratch = np.empty(64, dtype=np.int64), np.empty(64, dtype=np.int64)
    _run_chain(spec.m, qs, spf.spf, words, smalls, scratch[0], scratch[1], out, lo, tally)
    for q in qs:
        k = spec.m * int(q)
        sink(k, int(out[k - lo]))
    return int(qs.size)


@dataclass
class BlockWork:
    """Cells visited and k counts per path, accumulated over blocks."""

    cells: Dict[str, int]
    counts: Dict[str, int]

    @classmethod
    def empty(cls) -> "BlockWork":
        keys = ("smooth", "chain", "fallback")
        return cls(dict.fromkeys(keys, 0), dict.fromkeys(keys, 0))

    def merge(self, other: "BlockWork") -> None:
        for key in self.cells:
            self.cells[key] += other.cells[key]
            self.counts[key] += other.counts[key]

    @property
    def total_cells(self) -> int:
        return sum(self.cells.values())


def _split_round_robin(arr: np.ndarray, parts: int):
    return [arr[i::parts] for i in range(parts)]


def compute_block_subquadratic(lo: int, hi: int, split: SmoothSplit | None, wheel: int,
                               spf: SpfTable, all_primes: np.ndarray, workers: int = 1,
                               debug: bool = False):
    """(deltas for k in [lo, hi), BlockWork).

    With ``debug`` the per-k coverage tally is checked: every k must be
    produced by exactly one path.
    """
    if wheel not in WHEELS:
        raise ValueError(f"wheel modulus must be one of {WHEELS}")
    n = hi - lo
    out = np.zeros(n, dtype=np.int64)
    tally = np.zeros(n, dtype=np.int8)
    work = BlockWork.empty()
    B = split.B if split is not None else hi
    paths = np.empty(n, dtype=np.int8)
    _classify_block(lo, hi, B, spf.spf, paths)
    ks = np.arange(lo, hi, dtype=np.int64)
    smooth = ks[paths == PATH_SMOOTH]
    fallback = ks[paths == PATH_FALLBACK]
    work.counts["smooth"] = int(smooth.size)
    work.counts["fallback"] = int(fallback.size)
    work.counts["chain"] = int(n - smooth.size - fallback.size)

    # chains exist for m < sqrt(hi) only, since they need q > m
    m_top = math.isqrt(max(hi - 1, 0))
    ms = np.arange(1, m_top + 1, dtype=np.int64)
    # heavier jobs (large k) first so threads finish together
    jobs = []
    for part in _split_round_robin(smooth[::-1].copy(), workers):
        jobs.append(("smooth", part))
    for part in _split_round_robin(fallback[::-1].copy(), workers):
        jobs.append(("fallback", part))
    for part in _split_round_robin(ms, workers):
        jobs.append(("chain", part))

    def run(job):
        kind, arr = job
        if arr.size == 0:
            return kind, 0
        if kind == "chain":
            return kind, int(_chains_block(arr, all_primes, B, lo, hi, spf.spf, out, tally))
        return kind, int(_delta_list(arr, lo, spf.spf, wheel, out, tally))

    if workers == 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    for kind, cells in results:
        work.cells[kind] += cells
    if debug:
        bad = np.nonzero(tally != 1)[0]
        if bad.size:
            k = int(bad[0]) + lo
            raise AssertionError(f"k={k} covered {int(tally[bad[0]])} times")
    return out, work


def tabulate_m_subquadratic(n_max: int, workers: int = 1, **kwargs):
    """Tabulate delta(k) and M(k) for 1 <= k <= n_max using chains.

    Accepts the same keyword arguments as :func:`multable.tabulation.run_tabulation`
    plus ``gamma`` (smoothness exponent override) and ``debug``.
    """
    from .tabulation import run_tabulation

    return run_tabulation(n_max, algorithm="subquadratic", workers=workers, **kwargs)
