import pytest
import sympy

from conftest import sieve
from multable.numtheory import spf_table
from multable.primality import (
    DETERMINISTIC_LIMIT,
    Verdict,
    is_perfect_power,
    is_prime_power,
    is_probable_prime,
    miller_rabin,
)
from multable.rng import RandomStream


def carmichael_numbers(limit):
    """Korselt: squarefree composite n with p - 1 | n - 1 for every p | n."""
    spf = spf_table(limit)
    out = []
    for n in range(3, limit + 1, 2):
        f = spf.factorize(n)
        if len(f) < 2 or any(e > 1 for _, e in f):
            continue
        if all((n - 1) % (p - 1) == 0 for p, _ in f):
            out.append(n)
    return out


@pytest.mark.parametrize("n,prime", [(2, True), (561, False), (7919, True), (0, False), (1, False)])
def test_examples(n, prime):
    v = is_probable_prime(n)
    assert bool(v) is prime
    assert v.verdict is (Verdict.PROBABLY_PRIME if prime else Verdict.COMPOSITE)


def test_agrees_with_sieve_to_a_million():
    is_p = sieve(10 ** 6)
    for n in range(10 ** 6 + 1):
        assert miller_rabin(n)[0] == bool(is_p[n])


def test_random_rounds_agree_with_sieve():
    is_p = sieve(200_000)
    rng = RandomStream(3)
    for n in range(2, 200_001):
        assert miller_rabin(n, 10, rng, deterministic=False)[0] == bool(is_p[n])


def test_carmichael_and_composites_rejected():
    carm = carmichael_numbers(10 ** 6)
    assert carm[:5] == [561, 1105, 1729, 2465, 2821]
    assert len(carm) == 43
    carm_set = set(carm)
    is_p = sieve(20_000)
    composites = [n for n in range(4, 20_000) if not is_p[n] and n not in carm_set][:10_000]
    assert len(composites) == 10_000
    for seed in range(100):
        rng = RandomStream(seed)
        for n in carm:
            assert not miller_rabin(n, 20, rng, deterministic=False)[0]
    rng = RandomStream(1000)
    for n in composites:
        assert not miller_rabin(n, 20, rng, deterministic=False)[0]
        assert not is_probable_prime(n, 20)


@pytest.mark.parametrize("n", [
    3825123056546413051,  # strong pseudoprime to the first nine prime bases
    318665857834031151167461,
    3317044064679887385961981,
    2 ** 61 - 1,
    2 ** 89 - 1,
    2 ** 127 - 1,
    (2 ** 61 - 1) * (2 ** 89 - 1),
    10 ** 30 + 57,
    10 ** 50 + 151,
    2 ** 64 + 13,
])
def test_large_against_sympy(n):
    assert bool(is_probable_prime(n, 30, RandomStream(9))) == sympy.isprime(n)


def test_deterministic_range_is_exact():
    rng = RandomStream(4)
    for _ in range(2000):
        n = rng.randrange(DETERMINISTIC_LIMIT) | 1
        assert miller_rabin(n)[0] == sympy.isprime(n)


def test_rounds_validation():
    with pytest.raises(ValueError):
        is_probable_prime(7, rounds=0)
    with pytest.raises(ValueError):
        is_probable_prime(-3)


@pytest.mark.parametrize("n,expected", [(8, (2, 3)), (36, (6, 2)), (7, None), (1024, (2, 10)), (2, None)])
def test_perfect_power_examples(n, expected):
    assert is_perfect_power(n) == expected


def test_perfect_power_minimal_base():
    for b in range(2, 101):
        for e in range(2, 11):
            base, exp = is_perfect_power(b ** e)
            assert base ** exp == b ** e
            # minimal base: base is itself not a perfect power
            assert is_perfect_power(base) is None


def test_perfect_power_large():
    assert is_perfect_power(3 ** 200) == (3, 200)
    assert is_perfect_power(3 ** 200 + 1) is None


@pytest.mark.parametrize("n,expected", [(27, (3, 3)), (12, None), (125, (5, 3)), (13, (13, 1)), (2 ** 89, (2, 89))])
def test_prime_power_examples(n, expected):
    assert is_prime_power(n) == expected


def test_prime_power_composite_base():
    assert is_prime_power(6 ** 5) is None
    p = 2 ** 61 - 1
    assert is_prime_power(p ** 3) == (p, 3)


def test_word_primality_against_sympy():
    import random

    import numpy as np

    from multable.wordprime import is_prime_u64

    rng = random.Random(17)
    cases = list(range(5000)) + [2 ** 64 - 59, 2 ** 64 - 1, 2 ** 63 - 25, 3825123056546413051,
                                 341550071728321, 3215031751, 2152302898747, 3474749660383]
    cases += [rng.randrange(1 << rng.randrange(2, 65)) for _ in range(30_000)]
    for n in cases:
        assert is_prime_u64(np.uint64(n)) == sympy.isprime(n), n


def test_word_strong_pseudoprimes_rejected():
    import numpy as np

    from multable.wordprime import is_prime_u64

    # strong pseudoprimes to base 2 below 10^6
    spsp2 = [n for n in range(3, 10 ** 6, 2) if not sympy.isprime(n) and pow(2, n - 1, n) == 1
             and _strong(n, 2)]
    assert spsp2[:3] == [2047, 3277, 4033]
    for n in spsp2:
        assert not is_prime_u64(np.uint64(n))


def _strong(n, a):
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    x = pow(a, d, n)
    if x in (1, n - 1):
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def test_word_roots_and_prime_powers():
    import random

    import numpy as np

    from multable.wordprime import iroot_u64, mul128, prime_power_u64

    rng = random.Random(18)
    for _ in range(5000):
        a, b = rng.randrange(1 << 64), rng.randrange(1 << 64)
        hi, lo = mul128(np.uint64(a), np.uint64(b))
        assert (int(hi) << 64) | int(lo) == a * b
    cases = [(2 ** 64 - 1, e) for e in range(1, 64)]
    cases += [(rng.randrange(1 << 64), rng.randrange(1, 64)) for _ in range(3000)]
    for n, e in cases:
        r = int(iroot_u64(np.uint64(n), e))
        assert r ** e <= n < (r + 1) ** e
    for p, a in [(2, 63), (3, 40), (65521, 4), (4294967291, 2), (7, 1)]:
        assert prime_power_u64(np.uint64(p ** a)) == (p, a)
    for q in [6 ** 5, 3 * 2 ** 10, 4294967291 * 4294967279, 12, 1]:
        assert prime_power_u64(np.uint64(q))[0] == 0
