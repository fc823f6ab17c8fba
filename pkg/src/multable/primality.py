"""Miller-Rabin primality, perfect-power and prime-power tests.

Below 3317044064679887385961981 a prefix of the first 13 primes (length
depending on n) is a complete witness set, so verdicts there are exact; above it ``rounds`` random bases are
used and a probable-prime verdict is wrong with probability <= 4**-rounds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import gmpy2

from .rng import RandomStream

DEFAULT_ROUNDS = 30
DETERMINISTIC_LIMIT = 3317044064679887385961981
_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
# n below bound -> the first `count` primes are a complete witness set
_WITNESS_TIERS = (
    (2047, 1),
    (1373653, 2),
    (25326001, 3),
    (3215031751, 4),
    (2152302898747, 5),
    (3474749660383, 6),
    (341550071728321, 7),
    (3825123056546413051, 9),
    (318665857834031151167461, 12),
    (DETERMINISTIC_LIMIT, 13),
)
_SMALL_PRIMES = tuple(p for p in range(2, 1000) if all(p % d for d in range(2, int(p ** 0.5) + 1)))
_SMALL_SET = frozenset(_SMALL_PRIMES)
_SMALL_PRODUCT = math.prod(_SMALL_PRIMES)


class Verdict(enum.Enum):
    COMPOSITE = "composite"
    PROBABLY_PRIME = "probably_prime"


@dataclass(frozen=True)
class PrimalityVerdict:
    value: int
    verdict: Verdict
    rounds: int

    def __bool__(self) -> bool:
        return self.verdict is Verdict.PROBABLY_PRIME


def _strong_probable_prime(n: int, d: int, s: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def miller_rabin(n: int, rounds: int = DEFAULT_ROUNDS, rng: RandomStream | None = None,
                 deterministic: bool = True) -> Tuple[bool, int]:
    """(is probably prime, witnesses tried).

    ``deterministic=False`` skips the trial-division screen and the fixed
    witness sets, so every odd n > 3 goes through ``rounds`` random bases.
    """
    if n < 2:
        return False, 0
    if not deterministic:
        if n < 4 or not n & 1:
            return n < 4, 0
        return _random_rounds(n, rounds, rng)
    if n < 1000:
        return n in _SMALL_SET, 0
    if math.gcd(n, _SMALL_PRODUCT) != 1:
        return False, 0
    if n < 1_000_000:
        # no prime factor below 1000 and n < 1000^2
        return True, 0
    d, s = n - 1, 0
    while not d & 1:
        d >>= 1
        s += 1
    if n < DETERMINISTIC_LIMIT:
        count = next(c for bound, c in _WITNESS_TIERS if n < bound)
        for i in range(count):
            if not _strong_probable_prime(n, d, s, _BASES[i]):
                return False, i + 1
        return True, count
    return _random_rounds(n, rounds, rng, d, s)


def _random_rounds(n, rounds, rng, d=None, s=None):
    if d is None:
        d, s = n - 1, 0
        while not d & 1:
            d >>= 1
            s += 1
    if rng is None:
        rng = RandomStream(0)
    for i in range(rounds):
        a = 2 + rng.randrange(n - 3)
        if not _strong_probable_prime(n, d, s, a):
            return False, i + 1
    return True, rounds


def is_probable_prime(n: int, rounds: int = DEFAULT_ROUNDS,
                      rng: RandomStream | None = None) -> PrimalityVerdict:
    if n < 0:
        raise ValueError("is_probable_prime needs n >= 0")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    ok, used = miller_rabin(int(n), rounds, rng)
    return PrimalityVerdict(int(n), Verdict.PROBABLY_PRIME if ok else Verdict.COMPOSITE, used)


def is_perfect_power(n: int) -> Optional[Tuple[int, int]]:
    """(b, e) with b**e == n, e >= 2 maximal (so b minimal), or None."""
    if n < 1:
        raise ValueError("is_perfect_power needs n >= 1")
    if n == 1:
        # 1 = 1**e for every e; no meaningful maximal exponent
        return None
    if not gmpy2.is_power(n):
        return None
    for e in range(n.bit_length(), 1, -1):
        r, exact = gmpy2.iroot(n, e)
        if exact:
            return int(r), e
    return None


def is_prime_power(n: int, rounds: int = DEFAULT_ROUNDS,
                   rng: RandomStream | None = None) -> Optional[Tuple[int, int]]:
    """(p, e) with p**e == n and p probably prime, else None."""
    if n < 2:
        raise ValueError("is_prime_power needs n >= 2")
    if miller_rabin(n, rounds, rng)[0]:
        return n, 1
    pp = is_perfect_power(n)
    if pp is None:
        return None
    b, e = pp
    return (b, e) if miller_rabin(b, rounds, rng)[0] else None
