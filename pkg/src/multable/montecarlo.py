"""Monte Carlo estimates of M(n)/n^2.

Bernoulli: draw z uniform on [1, n^2]; a success is a divisor of z in
[ceil(z/n), n].  Estimate S/T with variance p(1-p)/(T-1).

Product: draw x, y uniform on [1, n] and let nu be the number of cells of
the table holding z = xy, i.e. the divisors of z in [ceil(z/n), n].  The
mean of 1/nu is unbiased for M(n)/n^2; its variance is estimated by
sum (1/nu_j - E)^2 / (T (T-1)).

Samples come with their factorization, so no factoring is ever done on
large z.  Per-trial outcomes are kept as a histogram of nu, which makes
the accumulated sums exact rationals regardless of batching.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numba as nb
import numpy as np

from .errors import CapacityError, DomainError
from .numtheory import factor_into, spf_table
from .primality import DEFAULT_ROUNDS
from .rng import RandomStream
from .sampler import (
    DEFAULT_SMALL_LIMIT,
    FAST_PATH_LIMIT,
    FactoredInt,
    SamplerStats,
    _b_word,
    _kalai_word,
    bach_b,
    draw_bach_fast,
    draw_kalai_fast,
    kalai_sample,
    seed_compiled,
)
from .wordprime import U0, U1

METHODS = ("bernoulli", "product")
SAMPLERS = ("bach", "kalai")
EXACT_VARIANCE_LIMIT = 300
#: n below this runs the compiled 64-bit trials (products stay below 2^64)
WORD_N_LIMIT = 1 << 32


# --------------------------------------------------------------------------
# divisors in a range
# --------------------------------------------------------------------------

def _prepare(z: FactoredInt):
    # largest primes first: the running divisor overshoots hi sooner
    fac = sorted(z.factors, reverse=True)
    rem = [1] * (len(fac) + 1)
    for i in range(len(fac) - 1, -1, -1):
        p, e = fac[i]
        rem[i] = rem[i + 1] * p ** e
    return fac, rem


def _walk(fac, rem, lo, hi, first_only):
    count = 0
    stack = [(0, 1)]
    nf = len(fac)
    while stack:
        i, d = stack.pop()
        if d > hi or d * rem[i] < lo:
            continue
        if i == nf:
            count += 1
            if first_only:
                return 1
            continue
        p, e = fac[i]
        for _ in range(e + 1):
            if d > hi:
                break
            stack.append((i + 1, d))
            d *= p
    return count


def divisor_in_range(z: FactoredInt, lo: int, hi: int) -> bool:
    """Whether some divisor of z lies in [lo, hi]; stops at the first hit."""
    if lo < 1 or lo > hi:
        raise DomainError("divisor_in_range needs 1 <= lo <= hi")
    fac, rem = _prepare(z)
    return _walk(fac, rem, lo, hi, True) == 1


def count_divisors_in_range(z: FactoredInt, lo: int, hi: int) -> int:
    if lo < 1 or lo > hi:
        raise DomainError("count_divisors_in_range needs 1 <= lo <= hi")
    fac, rem = _prepare(z)
    return _walk(fac, rem, lo, hi, False)


def multiplicity(z: FactoredInt, n: int) -> int:
    """nu(z): cells (i, j) of the n x n table with i*j = z."""
    lo = -(-z.value // n)
    if lo > n:
        return 0
    return count_divisors_in_range(z, lo, n)


# --------------------------------------------------------------------------
# compiled trials for n within the spf table
# --------------------------------------------------------------------------

@nb.njit
def _count_rec(i, d, primes, exps, rem, nf, lo, hi):
    if d > hi or d * rem[i] < lo:
        return 0
    if i == nf:
        return 1
    total = 0
    for _ in range(exps[i] + 1):
        if d > hi:
            break
        total += _count_rec(i + 1, d, primes, exps, rem, nf, lo, hi)
        d *= primes[i]
    return total


@nb.njit
def _nu_of(x, y, n, spf, primes, exps, rem, tmp_p, tmp_e):
    """Divisors of x*y in [ceil(xy/n), n], factoring x and y by table."""
    nx = factor_into(x, spf, primes, exps)
    ny = factor_into(y, spf, tmp_p, tmp_e)
    nf = nx
    for t in range(ny):
        found = False
        for u in range(nf):
            if primes[u] == tmp_p[t]:
                exps[u] += tmp_e[t]
                found = True
                break
        if not found:
            primes[nf] = tmp_p[t]
            exps[nf] = tmp_e[t]
            nf += 1
    # descending primes
    for a in range(1, nf):
        pa, ea = primes[a], exps[a]
        b = a - 1
        while b >= 0 and primes[b] < pa:
            primes[b + 1] = primes[b]
            exps[b + 1] = exps[b]
            b -= 1
        primes[b + 1] = pa
        exps[b + 1] = ea
    rem[nf] = 1
    for t in range(nf - 1, -1, -1):
        r = rem[t + 1]
        for _ in range(exps[t]):
            r *= primes[t]
        rem[t] = r
    z = x * y
    lo = (z + n - 1) // n
    if lo > n:
        return 0
    return _count_rec(0, 1, primes, exps, rem, nf, lo, n)


@nb.njit
def _trials_fast(n, T, product, kalai, small_limit, spf, hist, counters):
    primes = np.empty(64, dtype=np.int64)
    exps = np.empty(64, dtype=np.int64)
    rem = np.empty(65, dtype=np.int64)
    tmp_p = np.empty(64, dtype=np.int64)
    tmp_e = np.empty(64, dtype=np.int64)
    for _ in range(T):
        if product:
            if kalai:
                x = draw_kalai_fast(n, spf, counters)
                y = draw_kalai_fast(n, spf, counters)
            else:
                x = draw_bach_fast(n, small_limit, spf, counters)
                y = draw_bach_fast(n, small_limit, spf, counters)
            nu = _nu_of(x, y, n, spf, primes, exps, rem, tmp_p, tmp_e)
        else:
            if kalai:
                z = draw_kalai_fast(n * n, spf, counters)
            else:
                z = draw_bach_fast(n * n, small_limit, spf, counters)
            nu = 1 if _nu_of(z, 1, n, spf, primes, exps, rem, tmp_p, tmp_e) > 0 else 0
        hist[nu] += 1


# --------------------------------------------------------------------------
# compiled trials for n < 2^32 (64-bit products)
# --------------------------------------------------------------------------

@nb.njit
def _count_word(i, d, primes, exps, rem, nf, lo, hi, first_only):
    # rem[i] * d < lo, written without the 128-bit product
    if d > hi or rem[i] < (lo + d - U1) // d:
        return 0
    if i == nf:
        return 1
    total = 0
    for _ in range(exps[i] + 1):
        if d > hi:
            break
        total += _count_word(i + 1, d, primes, exps, rem, nf, lo, hi, first_only)
        if first_only and total:
            return total
        d *= primes[i]
    return total


@nb.njit
def _nu_word(fbuf, end, z, n, primes, exps, rem, first_only):
    """Divisors of z in [ceil(z/n), n]; fbuf[:end] lists z's primes with repeats."""
    lo = (z + n - U1) // n
    if lo > n:
        return 0
    f = np.sort(fbuf[:end])[::-1]
    nf = 0
    for t in range(end):
        if nf > 0 and primes[nf - 1] == f[t]:
            exps[nf - 1] += 1
        else:
            primes[nf] = f[t]
            exps[nf] = 1
            nf += 1
    rem[nf] = U1
    for t in range(nf - 1, -1, -1):
        r = rem[t + 1]
        for _ in range(exps[t]):
            r *= primes[t]
        rem[t] = r
    return _count_word(0, U1, primes, exps, rem, nf, lo, n, first_only)


@nb.njit
def _trials_word(n, T, product, kalai, small_limit, spf, hist, counters):
    fbuf = np.empty(128, dtype=np.uint64)
    primes = np.empty(64, dtype=np.uint64)
    exps = np.empty(64, dtype=np.int64)
    rem = np.empty(65, dtype=np.uint64)
    top = n if product else n * n
    for _ in range(T):
        if product:
            if kalai:
                xm1, e1 = _kalai_word(n - U1, counters, fbuf, 0)
                ym1, e2 = _kalai_word(n - U1, counters, fbuf, e1)
                z = (xm1 + U1) * (ym1 + U1)
            else:
                x, e1 = _b_word(n, small_limit, spf, counters, fbuf, 0)
                y, e2 = _b_word(n, small_limit, spf, counters, fbuf, e1)
                z = x * y
            nu = _nu_word(fbuf, e2, z, n, primes, exps, rem, False)
        else:
            if kalai:
                zm1, e2 = _kalai_word(top - U1, counters, fbuf, 0)
                z = zm1 + U1
            else:
                z, e2 = _b_word(top, small_limit, spf, counters, fbuf, 0)
            nu = 1 if _nu_word(fbuf, e2, z, n, primes, exps, rem, True) > 0 else 0
        hist[nu] += 1


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------

@dataclass
class EstimateReport:
    """Serialized as JSON with this field order."""

    n: Optional[int]
    n_exponent: Optional[int]
    method: str
    trials: int
    successes: Optional[int]
    estimate: float
    variance: float
    sigma: float
    seed: Optional[int]
    mr_rounds: int
    sampler: str
    workers: int
    wall_time_seconds: float

    def to_text(self) -> str:
        d = asdict(self)
        if self.n_exponent is not None:
            # 2^k - 1 can be enormous; the exponent identifies it
            d["n"] = None
        return json.dumps(d, indent=2) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EstimateReport":
        return cls(**json.loads(text))

    @property
    def n_value(self) -> int:
        return self.n if self.n is not None else (1 << self.n_exponent) - 1


def _merge_hist(hists):
    out = Counter()
    for h in hists:
        out.update(h)
    return out


def _moments(hist: Dict[int, int], method: str, T: int) -> Tuple[Fraction, Fraction]:
    """(estimate, Bessel variance of the estimate) as exact fractions."""
    if method == "bernoulli":
        S = hist.get(1, 0)
        p = Fraction(S, T)
        return p, p * (1 - p) / (T - 1)
    s1 = sum((Fraction(c, nu) for nu, c in hist.items()), Fraction(0))
    s2 = sum((Fraction(c, nu * nu) for nu, c in hist.items()), Fraction(0))
    E = s1 / T
    return E, (s2 - T * E * E) / (T * (T - 1))


def _run_batch(n, T, method, sampler, stream, rounds, small_limit, engine="auto"):
    """Histogram of per-trial outcomes (nu, or 0/1 for Bernoulli) and stats.

    ``engine`` is "auto", "word" (compiled 64-bit trials, n < 2^32) or
    "python" (the exact big-integer procedures).
    """
    stats = SamplerStats()
    product = method == "product"
    top = n if product else n * n
    if top <= FAST_PATH_LIMIT and engine == "auto":
        spf = spf_table(max(top, 1 << 20)).spf
        hist = np.zeros(1 << 16, dtype=np.int64)
        counters = np.zeros(2, dtype=np.int64)
        seed_compiled(stream.numba_seed())
        _trials_fast(n, T, product, sampler == "kalai", small_limit, spf, hist, counters)
        stats.samples += T * (2 if product else 1)
        stats.primality_tests += int(counters[0])
        stats.restarts += int(counters[1])
        nz = np.nonzero(hist)[0]
        return {int(v): int(hist[v]) for v in nz}, stats
    if n < WORD_N_LIMIT and engine != "python":
        spf = spf_table(1 << 20).spf
        # tau(z) < 2^17 for every z < 2^64
        hist = np.zeros(1 << 17, dtype=np.int64)
        counters = np.zeros(2, dtype=np.int64)
        seed_compiled(stream.numba_seed())
        _trials_word(np.uint64(n), T, product, sampler == "kalai", min(small_limit, 1 << 20), spf,
                     hist, counters)
        stats.samples += T * (2 if product else 1)
        stats.primality_tests += int(counters[0])
        stats.restarts += int(counters[1])
        nz = np.nonzero(hist)[0]
        return {int(v): int(hist[v]) for v in nz}, stats

    if sampler == "bach":
        def draw(N):
            return bach_b(N, stream, rounds, stats, small_limit)
    else:
        def draw(N):
            return kalai_sample(N, stream, rounds, stats)
    hist = Counter()
    n2 = n * n
    for _ in range(T):
        if product:
            z = draw(n) * draw(n)
            hist[multiplicity(z, n)] += 1
        else:
            z = draw(n2)
            lo = -(-z.value // n)
            hist[1 if lo <= n and divisor_in_range(z, lo, n) else 0] += 1
    return dict(hist), stats


def _batch_job(args):
    return _run_batch(*args)


def estimate(n: int, T: int, method: str = "product", rng: RandomStream | int | None = None,
             rounds: int = DEFAULT_ROUNDS, sampler: str = "bach", workers: int = 1,
             small_limit: int = DEFAULT_SMALL_LIMIT, n_exponent: int | None = None,
             return_stats: bool = False, engine: str = "auto"):
    """Run T trials of the chosen estimator and return an EstimateReport.

    Trials are split into ``workers`` batches, each with its own stream
    spawned from ``rng``; the result depends only on the seed and the
    worker count.  Batches run in separate processes when workers > 1.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    if n < 1:
        raise DomainError("n must be at least 1")
    if T < 2:
        raise DomainError("at least two trials are needed for a variance")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if engine not in ("auto", "word", "python"):
        raise ValueError("engine must be 'auto', 'word' or 'python'")
    if engine == "word" and n >= WORD_N_LIMIT:
        raise DomainError("the word engine needs n < 2^32")
    seed = None
    if not isinstance(rng, RandomStream):
        seed = rng
        rng = RandomStream(rng)
    elif isinstance(rng.entropy, int):
        seed = rng.entropy

    t0 = time.perf_counter()
    streams = rng.spawn(workers)
    sizes = [T // workers + (1 if i < T % workers else 0) for i in range(workers)]
    jobs = [(n, sizes[i], method, sampler, streams[i], rounds, small_limit, engine)
            for i in range(workers) if sizes[i]]
    if workers == 1:
        results = [_batch_job(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_job, jobs))
    hist = _merge_hist(h for h, _ in results)
    stats = SamplerStats()
    for _, st in results:
        stats = stats + st
    est, var = _moments(hist, method, T)
    report = EstimateReport(
        n=n, n_exponent=n_exponent, method=method, trials=T,
        successes=hist.get(1, 0) if method == "bernoulli" else None,
        estimate=float(est), variance=float(var), sigma=math.sqrt(float(var)),
        seed=seed, mr_rounds=rounds, sampler=sampler, workers=workers,
        wall_time_seconds=time.perf_counter() - t0)
    return (report, stats) if return_stats else report


def bernoulli_estimate(n: int, T: int, rng=None, rounds: int = DEFAULT_ROUNDS, **kwargs) -> EstimateReport:
    return estimate(n, T, "bernoulli", rng, rounds, **kwargs)


def product_estimate(n: int, T: int, rng=None, rounds: int = DEFAULT_ROUNDS, **kwargs) -> EstimateReport:
    return estimate(n, T, "product", rng, rounds, **kwargs)


# --------------------------------------------------------------------------
# exact variances
# --------------------------------------------------------------------------

def multiplicity_histogram(n: int) -> np.ndarray:
    """hist[v] = number of distinct products of the n x n table that occur in
    exactly v cells.  Sums to M(n).  The product range is swept in segments
    of 2^20 counters, so memory does not grow with n."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return _census(n, 1 << 20)


@nb.njit(cache=True)
def _census(n, S):
    N2 = n * n + 1
    cnt = np.zeros(S, dtype=np.uint16)
    cw = cnt.view(np.uint64)
    hist = np.zeros(1 << 16, dtype=np.int64)
    nxt = np.empty(n + 1, np.int64)
    for i in range(1, n + 1):
        nxt[i] = i * i
    lo = 0
    ilo = 1
    while lo < N2:
        hi = min(lo + S, N2)
        while ilo <= n and ilo * n < lo:
            ilo += 1
        i = ilo
        while i <= n and i * i < hi:
            q = nxt[i] - lo
            stop = min(i * n + 1, hi) - lo
            if q < stop:
                if q + lo == i * i:
                    # diagonal cell counted once, the rest of the row twice
                    cnt[q] += 1
                    q += i
                while q < stop:
                    cnt[q] += 2
                    q += i
            nxt[i] = q + lo
            i += 1
        mask = np.uint64(0xFFFF)
        for t in range(cw.shape[0]):
            x = cw[t]
            if x != 0:
                cw[t] = 0
                hist[x & mask] += 1
                hist[(x >> np.uint64(16)) & mask] += 1
                hist[(x >> np.uint64(32)) & mask] += 1
                hist[x >> np.uint64(48)] += 1
        lo = hi
    hist[0] = 0
    return hist


def exact_moments(n: int, hist: np.ndarray | None = None) -> Tuple[Fraction, Fraction]:
    """(p, E(nu^-2)) exactly, from the multiplicity histogram."""
    if hist is None:
        hist = multiplicity_histogram(n)
    nz = np.nonzero(hist)[0]
    M = int(hist.sum())
    s = sum((Fraction(int(hist[v]), int(v)) for v in nz), Fraction(0))
    return Fraction(M, n * n), s / (n * n)


def exact_variance_check(n: int, T: int = 1) -> Tuple[Fraction, Fraction]:
    """(V_product, V_bernoulli) for T trials, exactly, by enumerating the table."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if n > EXACT_VARIANCE_LIMIT:
        raise CapacityError(f"full enumeration is limited to n <= {EXACT_VARIANCE_LIMIT}")
    if T < 1:
        raise DomainError("T must be at least 1")
    counts = Counter(i * j for i in range(1, n + 1) for j in range(1, n + 1))
    p = Fraction(len(counts), n * n)
    # each distinct z sits in nu cells, each contributing 1/nu^2
    e2 = sum((Fraction(1, nu) for nu in counts.values()), Fraction(0)) / (n * n)
    return (e2 - p * p) / T, p * (1 - p) / T


def exact_expectations(n: int) -> Tuple[Fraction, Fraction]:
    """Exact expected values of one Bernoulli and one product trial.

    Enumerates every z in [1, n^2] and every (x, y) in [1, n]^2 using the
    same divisor-range routines the estimators call.
    """
    if n > 50:
        raise CapacityError("exact expectation enumeration is limited to n <= 50")
    spf = spf_table(n * n + 1)
    fz = [FactoredInt(z, tuple(spf.factorize(z))) for z in range(1, n * n + 1)]
    hits = 0
    for z in fz:
        lo = -(-z.value // n)
        if lo <= n and divisor_in_range(z, lo, n):
            hits += 1
    bern = Fraction(hits, n * n)
    prod = Fraction(0)
    for x in range(1, n + 1):
        for y in range(1, n + 1):
            prod += Fraction(1, multiplicity(fz[x - 1] * fz[y - 1], n))
    return bern, prod / (n * n)
