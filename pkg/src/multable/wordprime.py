"""Compiled 64-bit arithmetic: Montgomery products, Miller-Rabin and
integer roots for values below 2**64.

Everything here works on ``np.uint64``; mixing with signed integers makes
numba promote to float, so constants are cast explicitly.
"""

import numba as nb
import numpy as np

U0 = np.uint64(0)
U1 = np.uint64(1)
U2 = np.uint64(2)
U32 = np.uint64(32)
U63 = np.uint64(63)
MASK32 = np.uint64(0xFFFFFFFF)
UMAX = np.uint64(0xFFFFFFFFFFFFFFFF)

# witness prefixes of the first 12 primes are complete below these bounds
_TIER_BOUNDS = np.array([2047, 1373653, 25326001, 3215031751, 2152302898747, 3474749660383,
                         341550071728321, 3825123056546413051], dtype=np.uint64)
_TIER_COUNTS = np.array([1, 2, 3, 4, 5, 6, 7, 9], dtype=np.int64)
_BASES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37], dtype=np.uint64)
_SMALL = np.array([p for p in range(3, 64) if all(p % d for d in range(2, p))], dtype=np.uint64)


@nb.njit(inline="always")
def mul128(a, b):
    """(hi, lo) of the 128-bit product a*b."""
    a0 = a & MASK32
    a1 = a >> U32
    b0 = b & MASK32
    b1 = b >> U32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> U32) + (p01 & MASK32) + (p10 & MASK32)
    lo = (mid << U32) | (p00 & MASK32)
    hi = p11 + (p01 >> U32) + (p10 >> U32) + (mid >> U32)
    return hi, lo


@nb.njit(inline="always")
def _redc(hi, lo, m, minv):
    # (hi*2^64 + lo) / 2^64 mod m, for hi < m
    u = lo * minv
    th, tl = mul128(u, m)
    c = U1 if lo + tl < lo else U0
    s1 = hi + th
    ov = s1 < hi
    s2 = s1 + c
    ov = ov or s2 < s1
    if ov or s2 >= m:
        s2 -= m
    return s2


@nb.njit(inline="always")
def _mont_mul(a, b, m, minv):
    hi, lo = mul128(a, b)
    return _redc(hi, lo, m, minv)


@nb.njit(inline="always")
def _addmod(a, b, m):
    s = a + b
    if s < a or s >= m:
        s -= m
    return s


@nb.njit
def _neg_inverse(m):
    # Newton iteration for m^-1 mod 2^64 (m odd), negated
    x = m
    for _ in range(6):
        x *= U2 - m * x
    return U0 - x


@nb.njit
def mulmod(a, b, m):
    """a*b mod m for any m >= 1 (shift and add; for tests and odd jobs)."""
    a %= m
    b %= m
    r = U0
    while b:
        if b & U1:
            r = _addmod(r, a, m)
        a = _addmod(a, a, m)
        b >>= U1
    return r


@nb.njit
def _sprp(n, d, s, a, minv, one, r2):
    # strong probable prime test to base a, Montgomery domain
    m1 = n - one  # n-1 in Montgomery form
    x = _mont_mul(a % n, r2, n, minv)
    y = one
    e = d
    while e:
        if e & U1:
            y = _mont_mul(y, x, n, minv)
        x = _mont_mul(x, x, n, minv)
        e >>= U1
    if y == one or y == m1:
        return True
    for _ in range(s - 1):
        y = _mont_mul(y, y, n, minv)
        if y == m1:
            return True
        if y == one:
            return False
    return False


@nb.njit
def is_prime_u64(n):
    """Exact primality for 0 <= n < 2**64 (deterministic witness sets)."""
    if n < U2:
        return False
    if not n & U1:
        return n == U2
    if n < np.uint64(64):
        for p in _SMALL:
            if n == p:
                return True
        return False
    # constant divisors compile to multiplications
    if (n % np.uint64(3) == U0 or n % np.uint64(5) == U0 or n % np.uint64(7) == U0
            or n % np.uint64(11) == U0 or n % np.uint64(13) == U0 or n % np.uint64(17) == U0
            or n % np.uint64(19) == U0 or n % np.uint64(23) == U0 or n % np.uint64(29) == U0
            or n % np.uint64(31) == U0 or n % np.uint64(37) == U0 or n % np.uint64(41) == U0
            or n % np.uint64(43) == U0 or n % np.uint64(47) == U0 or n % np.uint64(53) == U0
            or n % np.uint64(59) == U0 or n % np.uint64(61) == U0):
        return False
    if n < np.uint64(4096):
        return True
    d = n - U1
    s = 0
    while not d & U1:
        d >>= U1
        s += 1
    minv = _neg_inverse(n)
    one = (U0 - n) % n  # 2^64 mod n
    r2 = one
    for _ in range(64):
        r2 = _addmod(r2, r2, n)
    count = 12
    for t in range(_TIER_BOUNDS.shape[0]):
        if n < _TIER_BOUNDS[t]:
            count = _TIER_COUNTS[t]
            break
    for i in range(count):
        if not _sprp(n, d, s, _BASES[i], minv, one, r2):
            return False
    return True


@nb.njit
def _pow_cmp(b, e, n):
    """Sign of b**e - n, without overflow."""
    r = U1
    for _ in range(e):
        if b != U0 and r > n // b:
            return 1
        r *= b
    return 0 if r == n else -1


@nb.njit
def iroot_u64(n, e):
    """floor(n ** (1/e)) for n < 2**64, e >= 1."""
    if e == 1 or n < U2:
        return n
    r = np.uint64(min(np.floor(np.float64(n) ** (1.0 / e)), 4294967295.0))
    # float estimate is within a few units; walk to the exact floor
    while r > U0 and _pow_cmp(r, e, n) > 0:
        r -= U1
    while _pow_cmp(r + U1, e, n) <= 0:
        r += U1
    return r


@nb.njit
def prime_power_u64(q):
    """(p, a) with q = p**a and p prime, else (0, 0); counts as one test."""
    if q < U2:
        return U0, 0
    if is_prime_u64(q):
        return q, 1
    # a prime power with exponent a >= 2 has its base below 2^32
    tz = 0
    t = q
    while not t & U1:
        t >>= U1
        tz += 1
    if tz > 0:
        return (U2, tz) if t == U1 else (U0, 0)
    for a in range(2, 41):
        r = iroot_u64(q, a)
        if r < U2:
            break
        if _pow_cmp(r, a, q) == 0:
            # smallest a first; the recursion folds in any further power
            b, k = prime_power_u64(r)
            if b != U0:
                return b, k * a
            return U0, 0
    return U0, 0
