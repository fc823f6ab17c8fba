"""Uniform random integers delivered with their prime factorization.

``bach_b`` draws x uniform on [1, N]: it halves N with probability
floor(N/2)/N and otherwise calls ``bach_r``, which draws x uniform on
(floor(N/2), N] as follows.

1. Pick a prime power q = p**a with probability proportional to
   log(p) * c_q, where c_q = N//q - h//q (h = N//2) is the number of
   multiples of q in (h, N].  This is rejection sampling over dyadic
   blocks [2**k, 2**(k+1)) with envelope (k+1)*log(2) * max c_q;
   non prime powers are rejected, and q = p**a survives with
   probability 1/a so that the weight becomes log p rather than log q.
2. Draw y uniform on (h//q, N//q] = (b//2, b] with b = N//q, which is
   ``bach_r(b)`` again, and set x = q*y.  Summed over the prime powers
   dividing x, P(x) is proportional to log x.
3. Accept x with probability log(h+1)/log(x), otherwise start over.

``kalai_sample`` draws N >= s_1 >= s_2 >= ... >= 1 with s_{i+1} uniform on
[1, s_i], multiplies the prime s_i into r, and accepts r with probability
r/N when r <= N.

Values up to ``small_limit`` are drawn directly and factored with the
smallest-prime-factor table.  Compiled versions of both samplers run from
the table (N <= 2**24) or with word-size primality (N <= 2**64).
"""

from __future__ import annotations

import math
import time
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numba as nb
import numpy as np

from .errors import DomainError
from .numtheory import SpfTable, spf_table
from .primality import DEFAULT_ROUNDS, is_perfect_power, miller_rabin
from .rng import RandomStream
from .wordprime import U32, UMAX, U0, U1, U2, is_prime_u64, prime_power_u64

#: values at or below this are drawn directly and factored by table
DEFAULT_SMALL_LIMIT = 1 << 16
#: largest N handled by the compiled table-driven path
FAST_PATH_LIMIT = 1 << 24
_TABLE_LIMIT = 1 << 20
_LN2 = math.log(2)


@dataclass(frozen=True)
class FactoredInt:
    value: int
    factors: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        prev = 1
        for p, e in self.factors:
            if p <= prev or e < 1:
                raise ValueError(f"bad factor list {self.factors}")
            prev = p
            prod *= p ** e
        if prod != self.value:
            raise ValueError(f"factors {self.factors} do not multiply to {self.value}")

    @classmethod
    def one(cls) -> "FactoredInt":
        return cls(1, ())

    @classmethod
    def from_counter(cls, counts: Dict[int, int]) -> "FactoredInt":
        value = 1
        for p, e in counts.items():
            value *= p ** e
        return cls(value, tuple(sorted(counts.items())))

    def __mul__(self, other: "FactoredInt") -> "FactoredInt":
        merged = Counter(dict(self.factors))
        for p, e in other.factors:
            merged[p] += e
        return FactoredInt(self.value * other.value, tuple(sorted(merged.items())))

    def verify(self, rounds: int = DEFAULT_ROUNDS, rng: RandomStream | None = None) -> bool:
        """Factors multiply to value and every prime passes Miller-Rabin."""
        prod = 1
        for p, e in self.factors:
            if not miller_rabin(p, rounds, rng)[0]:
                return False
            prod *= p ** e
        return prod == self.value


@dataclass
class SamplerStats:
    samples: int = 0
    primality_tests: int = 0
    restarts: int = 0

    def __add__(self, other: "SamplerStats") -> "SamplerStats":
        return SamplerStats(self.samples + other.samples,
                            self.primality_tests + other.primality_tests,
                            self.restarts + other.restarts)


class _Ctx:
    """Per-call state threaded through the recursion."""

    __slots__ = ("rng", "rounds", "stats", "small_limit", "spf")

    def __init__(self, rng, rounds, stats, small_limit):
        self.rng = rng
        self.rounds = rounds
        self.stats = stats if stats is not None else SamplerStats()
        self.small_limit = small_limit
        self.spf = spf_table(max(_TABLE_LIMIT, small_limit))

    def table_factor(self, x: int) -> FactoredInt:
        return FactoredInt(x, tuple(self.spf.factorize(x)))

    def prime_power(self, q: int):
        """(p, a) if q = p**a, else None; counts one test."""
        self.stats.primality_tests += 1
        if q <= self.spf.limit:
            p = int(self.spf.spf[q])
            a = 0
            while q % p == 0:
                q //= p
                a += 1
            return (p, a) if q == 1 else None
        if miller_rabin(q, self.rounds, self.rng)[0]:
            return q, 1
        pp = is_perfect_power(q)
        if pp is None:
            return None
        self.stats.primality_tests += 1
        return pp if miller_rabin(pp[0], self.rounds, self.rng)[0] else None

    def is_prime(self, s: int) -> bool:
        self.stats.primality_tests += 1
        if s <= self.spf.limit:
            return s >= 2 and int(self.spf.spf[s]) == s
        return miller_rabin(s, self.rounds, self.rng)[0]


@lru_cache(maxsize=1 << 14)
def _blocks(N: int):
    """Dyadic blocks for step 1: (starts, sizes, envelopes, cumulative weights).

    Block k holds q in [2**k, 2**(k+1)); its envelope (k+1)*log 2 * cmax
    bounds log(q) * c_q there, with cmax = (L-1)//2**k + 1 the most
    multiples any q >= 2**k can have among L = N - N//2 consecutive values.
    """
    L = N - N // 2
    starts, sizes, env, cum = [], [], [], []
    total = 0.0
    for k in range(1, N.bit_length()):
        lo = 1 << k
        size = min(lo, N - lo + 1)
        e = (k + 1) * _LN2 * ((L - 1) // lo + 1)
        starts.append(lo)
        sizes.append(size)
        env.append(e)
        total += e * size
        cum.append(total)
    return starts, sizes, env, cum


def _r(N: int, ctx: _Ctx) -> FactoredInt:
    if N == 1:
        return FactoredInt.one()
    rng = ctx.rng
    h = N // 2
    if N <= ctx.small_limit:
        return ctx.table_factor(h + 1 + rng.randrange(N - h))
    starts, sizes, env, cum = _blocks(N)
    total = cum[-1]
    log_h1 = math.log(h + 1)
    rand = rng.random
    while True:
        # step 1: prime power q with weight log(p) * c_q
        while True:
            k = bisect_right(cum, rand() * total)
            if k == len(cum):
                k -= 1
            q = starts[k] + rng.randrange(sizes[k])
            c = N // q - h // q
            if rand() * env[k] >= math.log(q) * c:
                ctx.stats.restarts += 1
                continue
            pp = ctx.prime_power(q)
            if pp is None or (pp[1] > 1 and rng.randrange(pp[1]) != 0):
                ctx.stats.restarts += 1
                continue
            break
        # step 2: cofactor uniform on (h//q, N//q]
        y = _r(N // q, ctx)
        x = q * y.value
        # step 3: flatten the log x bias
        if rand() * math.log(x) < log_h1:
            return FactoredInt(pp[0] ** pp[1], ((pp[0], pp[1]),)) * y
        ctx.stats.restarts += 1


def bach_r(N: int, rng: RandomStream, rounds: int = DEFAULT_ROUNDS,
           stats: SamplerStats | None = None, small_limit: int = DEFAULT_SMALL_LIMIT) -> FactoredInt:
    """x uniform on (floor(N/2), N] with its factorization."""
    if N < 2:
        raise DomainError("bach_r needs N >= 2")
    ctx = _Ctx(rng, rounds, stats, small_limit)
    out = _r(int(N), ctx)
    ctx.stats.samples += 1
    return out


def bach_b(N: int, rng: RandomStream, rounds: int = DEFAULT_ROUNDS,
           stats: SamplerStats | None = None, small_limit: int = DEFAULT_SMALL_LIMIT) -> FactoredInt:
    """x uniform on [1, N] with its factorization."""
    if N < 1:
        raise DomainError("bach_b needs N >= 1")
    ctx = _Ctx(rng, rounds, stats, small_limit)
    ctx.stats.samples += 1
    N = int(N)
    while True:
        if N == 1:
            return FactoredInt.one()
        if N <= small_limit:
            return ctx.table_factor(1 + rng.randrange(N))
        if rng.randrange(N) < N // 2:
            N //= 2
            continue
        return _r(N, ctx)


def kalai_sample(N: int, rng: RandomStream, rounds: int = DEFAULT_ROUNDS,
                 stats: SamplerStats | None = None) -> FactoredInt:
    """x uniform on [1, N] with its factorization (Kalai's method)."""
    if N < 1:
        raise DomainError("kalai_sample needs N >= 1")
    ctx = _Ctx(rng, rounds, stats, 1)
    ctx.stats.samples += 1
    N = int(N)
    if N == 1:
        return FactoredInt.one()
    randrange = rng.randrange
    while True:
        s = N
        r = 1
        primes = []
        while s > 1:
            s = 1 + randrange(s)
            if s > 1 and ctx.is_prime(s):
                r *= s
                primes.append(s)
                if r > N:
                    break
        if r <= N and randrange(N) < r:
            return FactoredInt.from_counter(Counter(primes))
        ctx.stats.restarts += 1


# --------------------------------------------------------------------------
# compiled path for N within the spf table
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def seed_compiled(seed):
    np.random.seed(seed)


@nb.njit
def _r_fast(N, small_limit, spf, counters):
    if N == 1:
        return 1
    h = N // 2
    if N <= small_limit:
        return h + 1 + np.random.randint(0, N - h)
    L = N - h
    nb_ = 0
    while (1 << (nb_ + 1)) <= N:
        nb_ += 1
    cum = np.empty(nb_)
    env = np.empty(nb_)
    total = 0.0
    for t in range(nb_):
        lo = 1 << (t + 1)
        hi = min(2 * lo - 1, N)
        env[t] = (t + 2) * np.log(2.0) * ((L - 1) // lo + 1)
        total += env[t] * (hi - lo + 1)
        cum[t] = total
    log_h1 = np.log(h + 1)
    while True:
        while True:
            t = np.searchsorted(cum, np.random.random() * total, side="right")
            if t == nb_:
                t -= 1
            lo = 1 << (t + 1)
            hi = min(2 * lo - 1, N)
            q = lo + np.random.randint(0, hi - lo + 1)
            c = N // q - h // q
            if np.random.random() * env[t] >= np.log(q) * c:
                counters[1] += 1
                continue
            counters[0] += 1
            p = spf[q]
            rest = q
            a = 0
            while rest % p == 0:
                rest //= p
                a += 1
            if rest != 1 or (a > 1 and np.random.randint(0, a) != 0):
                counters[1] += 1
                continue
            break
        x = q * _r_fast(N // q, small_limit, spf, counters)
        if np.random.random() * np.log(x) < log_h1:
            return x
        counters[1] += 1


@nb.njit
def draw_bach_fast(N, small_limit, spf, counters):
    """One procedure-B draw on [1, N]; spf must cover N."""
    while True:
        if N == 1:
            return 1
        if N <= small_limit:
            return 1 + np.random.randint(0, N)
        if np.random.randint(0, N) < N // 2:
            N //= 2
            continue
        return _r_fast(N, small_limit, spf, counters)


@nb.njit(cache=True)
def draw_kalai_fast(N, spf, counters):
    """One Kalai draw on [1, N]; spf must cover N."""
    if N == 1:
        return 1
    while True:
        s = N
        r = 1
        while s > 1:
            s = 1 + np.random.randint(0, s)
            if s > 1:
                counters[0] += 1
                if spf[s] == s:
                    r *= s
                    if r > N:
                        break
        if r <= N and np.random.randint(0, N) < r:
            return r
        counters[1] += 1


@nb.njit
def _sample_fast(N, count, kalai, small_limit, spf, out, counters):
    for i in range(count):
        if kalai:
            out[i] = draw_kalai_fast(N, spf, counters)
        else:
            out[i] = draw_bach_fast(N, small_limit, spf, counters)


@nb.njit
def _sample_r_fast(N, count, small_limit, spf, out, counters):
    for i in range(count):
        out[i] = _r_fast(N, small_limit, spf, counters)


def sample_r_values(N: int, count: int, rng: RandomStream, small_limit: int = DEFAULT_SMALL_LIMIT,
                    stats: SamplerStats | None = None) -> np.ndarray:
    """``count`` compiled Process R draws on (N//2, N] (2 <= N <= FAST_PATH_LIMIT)."""
    if not 2 <= N <= FAST_PATH_LIMIT:
        raise DomainError(f"sample_r_values needs 2 <= N <= {FAST_PATH_LIMIT}")
    stats = stats if stats is not None else SamplerStats()
    spf = spf_table(max(N, _TABLE_LIMIT)).spf
    out = np.empty(count, dtype=np.int64)
    counters = np.zeros(2, dtype=np.int64)
    seed_compiled(rng.numba_seed())
    _sample_r_fast(N, count, small_limit, spf, out, counters)
    stats.samples += count
    stats.primality_tests += int(counters[0])
    stats.restarts += int(counters[1])
    return out


def sample_values(N: int, count: int, rng: RandomStream, sampler: str = "bach",
                  small_limit: int = DEFAULT_SMALL_LIMIT, rounds: int = DEFAULT_ROUNDS,
                  stats: SamplerStats | None = None):
    """``count`` draws on [1, N] as an int64 array (N <= FAST_PATH_LIMIT,
    compiled) or a list of ints (larger N, via the exact procedures)."""
    if sampler not in ("bach", "kalai"):
        raise ValueError("sampler must be 'bach' or 'kalai'")
    if N < 1:
        raise DomainError("N must be at least 1")
    stats = stats if stats is not None else SamplerStats()
    if N <= FAST_PATH_LIMIT:
        spf = spf_table(max(N, _TABLE_LIMIT)).spf
        out = np.empty(count, dtype=np.int64)
        counters = np.zeros(2, dtype=np.int64)
        seed_compiled(rng.numba_seed())
        _sample_fast(N, count, sampler == "kalai", small_limit, spf, out, counters)
        stats.samples += count
        stats.primality_tests += int(counters[0])
        stats.restarts += int(counters[1])
        return out
    draw = bach_b if sampler == "bach" else kalai_sample
    kwargs = {"small_limit": small_limit} if sampler == "bach" else {}
    return [draw(N, rng, rounds, stats, **kwargs).value for _ in range(count)]


# --------------------------------------------------------------------------
# compiled path for N up to 2**64 (word-size primality)
# --------------------------------------------------------------------------

WORD_LIMIT = 1 << 64
_MAX_FACTORS = 64
_CHUNK = 1 << 16


@nb.njit(inline="always")
def _rand_u64():
    return (np.uint64(np.random.randint(0, 1 << 32)) << U32) | np.uint64(np.random.randint(0, 1 << 32))


@nb.njit
def _upto(t):
    """Uniform on [0, t] for any uint64 t."""
    if t == UMAX:
        return _rand_u64()
    mask = t
    for sh in (1, 2, 4, 8, 16, 32):
        mask |= mask >> np.uint64(sh)
    while True:
        r = _rand_u64() & mask
        if r <= t:
            return r


@nb.njit
def _push_table(x, spf, fbuf, fpos):
    while x > 1:
        p = spf[x]
        fbuf[fpos] = np.uint64(p)
        fpos += 1
        x //= p
    return fpos


@nb.njit
def _r_word(N, small_limit, spf, counters, fbuf, fpos):
    """Process R on (N//2, N] for 2 <= N < 2**64; factors go to fbuf[fpos:]."""
    if N == U1:
        return U1, fpos
    h = N // U2
    if N <= np.uint64(small_limit):
        x = h + U1 + _upto(N - h - U1)
        return x, _push_table(np.int64(x), spf, fbuf, fpos)
    L = N - h
    nb_ = 0
    while nb_ < 63 and (U1 << np.uint64(nb_ + 1)) <= N:
        nb_ += 1
    cum = np.empty(nb_)
    env = np.empty(nb_)
    total = 0.0
    for t in range(nb_):
        lo = U1 << np.uint64(t + 1)
        hi = min(lo + (lo - U1), N)
        env[t] = (t + 2) * np.log(2.0) * np.float64((L - U1) // lo + U1)
        total += env[t] * np.float64(hi - lo + U1)
        cum[t] = total
    log_h1 = np.log(np.float64(h) + 1.0)
    table = np.uint64(spf.shape[0] - 1)
    while True:
        while True:
            t = np.searchsorted(cum, np.random.random() * total, side="right")
            if t == nb_:
                t -= 1
            lo = U1 << np.uint64(t + 1)
            hi = min(lo + (lo - U1), N)
            q = lo + _upto(hi - lo)
            c = N // q - h // q
            if np.random.random() * env[t] >= np.log(np.float64(q)) * np.float64(c):
                counters[1] += 1
                continue
            counters[0] += 1
            if q <= table:
                p = np.uint64(spf[np.int64(q)])
                rest = q
                a = 0
                while rest % p == U0:
                    rest //= p
                    a += 1
                if rest != U1:
                    p = U0
            else:
                p, a = prime_power_u64(q)
            if p == U0 or (a > 1 and np.random.randint(0, a) != 0):
                counters[1] += 1
                continue
            break
        for i in range(a):
            fbuf[fpos + i] = p
        y, end = _r_word(N // q, small_limit, spf, counters, fbuf, fpos + a)
        x = q * y
        if np.random.random() * np.log(np.float64(x)) < log_h1:
            return x, end
        counters[1] += 1


@nb.njit
def _b_word(N, small_limit, spf, counters, fbuf, fpos):
    """Procedure B on [1, N] for 1 <= N < 2**64."""
    while True:
        if N == U1:
            return U1, fpos
        if N <= np.uint64(small_limit):
            x = U1 + _upto(N - U1)
            return x, _push_table(np.int64(x), spf, fbuf, fpos)
        if _upto(N - U1) < N // U2:
            N //= U2
            continue
        return _r_word(N, small_limit, spf, counters, fbuf, fpos)


@nb.njit
def _kalai_word(nm1, counters, fbuf, fpos):
    """Kalai draw on [1, N] with N = nm1 + 1 <= 2**64; returns (x - 1, end of factors)."""
    if nm1 == U0:
        return U0, fpos
    while True:
        t = nm1  # s - 1
        rm1 = U0  # r - 1
        end = fpos
        over = False
        while t > U0:
            t = _upto(t)
            if t > U0:
                s = t + U1  # wraps to 0 for s = 2**64, which is not prime
                counters[0] += 1
                if is_prime_u64(s):
                    limit = nm1 // s + (U1 if nm1 % s == s - U1 else U0)
                    if rm1 >= limit:
                        over = True
                        break
                    rm1 = rm1 * s + (s - U1)
                    fbuf[end] = s
                    end += 1
        if not over and _upto(nm1) <= rm1:
            return rm1, end
        counters[1] += 1


@nb.njit
def _sample_word(nm1, count, kalai, small_limit, spf, vals, fbuf, offs, counters):
    """count draws on [1, nm1 + 1]; vals holds x - 1, factors of draw i are
    fbuf[offs[i]:offs[i+1]]."""
    pos = 0
    offs[0] = 0
    for i in range(count):
        if kalai:
            xm1, pos = _kalai_word(nm1, counters, fbuf, pos)
        else:
            x, pos = _b_word(nm1 + U1, small_limit, spf, counters, fbuf, pos)
            xm1 = x - U1
        vals[i] = xm1
        offs[i + 1] = pos


def _factored(value: int, primes) -> FactoredInt:
    return FactoredInt(value, tuple(sorted(Counter(int(p) for p in primes).items())))


def _bach_word_top(N: int, small_limit: int, spf, rng: RandomStream, ctx: _Ctx, counters,
                   fbuf) -> FactoredInt:
    """Procedure B at N = 2**64: the top step runs here, every subproblem
    (N//q < 2**64) runs compiled."""
    if rng.randrange(N) < N // 2:
        x, end = _b_word(np.uint64(N // 2), small_limit, spf, counters, fbuf, 0)
        return _factored(int(x), fbuf[:end])
    h = N // 2
    starts, sizes, env, cum = _blocks(N)
    total = cum[-1]
    log_h1 = math.log(h + 1)
    while True:
        while True:
            k = bisect_right(cum, rng.random() * total)
            if k == len(cum):
                k -= 1
            q = starts[k] + rng.randrange(sizes[k])
            c = N // q - h // q
            if rng.random() * env[k] >= math.log(q) * c:
                ctx.stats.restarts += 1
                continue
            pp = ctx.prime_power(q)
            if pp is None or (pp[1] > 1 and rng.randrange(pp[1]) != 0):
                ctx.stats.restarts += 1
                continue
            break
        y, end = _r_word(np.uint64(N // q), small_limit, spf, counters, fbuf, 0)
        x = q * int(y)
        if rng.random() * math.log(x) < log_h1:
            return _factored(x, [pp[0]] * pp[1] + [int(p) for p in fbuf[:end]])
        ctx.stats.restarts += 1


def sample_factored(N: int, count: int, rng: RandomStream, sampler: str = "bach",
                    small_limit: int = DEFAULT_SMALL_LIMIT,
                    stats: SamplerStats | None = None) -> list:
    """``count`` factored draws on [1, N] for 1 <= N <= 2**64 through the
    compiled word-size path."""
    if sampler not in ("bach", "kalai"):
        raise ValueError("sampler must be 'bach' or 'kalai'")
    if not 1 <= N <= WORD_LIMIT:
        raise DomainError(f"sample_factored needs 1 <= N <= 2**64, got {N}")
    stats = stats if stats is not None else SamplerStats()
    small_limit = min(small_limit, _TABLE_LIMIT)
    spf = spf_table(_TABLE_LIMIT).spf
    counters = np.zeros(2, dtype=np.int64)
    seed_compiled(rng.numba_seed())
    out = []
    if sampler == "bach" and N == WORD_LIMIT:
        ctx = _Ctx(rng, DEFAULT_ROUNDS, stats, small_limit)
        fbuf = np.empty(_MAX_FACTORS, dtype=np.uint64)
        out = [_bach_word_top(N, small_limit, spf, rng, ctx, counters, fbuf) for _ in range(count)]
    else:
        done = 0
        while done < count:
            m = min(_CHUNK, count - done)
            vals = np.empty(m, dtype=np.uint64)
            fbuf = np.empty(m * _MAX_FACTORS, dtype=np.uint64)
            offs = np.empty(m + 1, dtype=np.int64)
            _sample_word(np.uint64(N - 1), m, sampler == "kalai", small_limit, spf, vals, fbuf,
                         offs, counters)
            fl = fbuf.tolist()
            ol = offs.tolist()
            out.extend(_factored(v + 1, fl[ol[i]:ol[i + 1]]) for i, v in enumerate(vals.tolist()))
            done += m
    stats.samples += count
    stats.primality_tests += int(counters[0])
    stats.restarts += int(counters[1])
    return out


def sampler_benchmark(N: int, draws: int, rng: RandomStream, rounds: int = DEFAULT_ROUNDS,
                      small_limit: int = DEFAULT_SMALL_LIMIT):
    """Side-by-side stats and wall time: {'bach': (stats, s), 'kalai': (stats, s)}."""
    out = {}
    for name in ("bach", "kalai"):
        stats = SamplerStats()
        t0 = time.perf_counter()
        for _ in range(max(draws, 0)):
            if name == "bach":
                bach_b(N, rng, rounds, stats, small_limit)
            else:
                kalai_sample(N, rng, rounds, stats)
        out[name] = (stats, time.perf_counter() - t0)
    return out
