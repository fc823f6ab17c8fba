import random

import numpy as np
import pytest

from multable.errors import ContractError, DomainError
from multable.incremental import compute_deltas, delta_value, tabulate_m
from multable.numtheory import largest_prime_factor, primes_in, spf_table
from multable.subquadratic import (
    PATH_CHAIN,
    PATH_FALLBACK,
    PATH_SMOOTH,
    ChainSpec,
    SmoothSplit,
    chain_start,
    compute_block_subquadratic,
    delta_chain_step,
    l_function,
    run_chain,
    tabulate_m_subquadratic,
    _classify_block,
)

# exp(sqrt(log n log log n)) evaluated with mpmath at 30 digits
L_16 = 5.37359799477449
L_2_30 = 2818.14294282245677


def test_l_function_values():
    assert l_function(16) == pytest.approx(L_16, rel=1e-12)
    assert l_function(1 << 30) == pytest.approx(L_2_30, rel=1e-12)
    assert l_function(1 << 30) == pytest.approx(2.83e3, rel=0.01)


def test_l_function_increasing():
    vals = [l_function(1 << k) for k in range(4, 61)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_l_function_domain():
    with pytest.raises(DomainError):
        l_function(15)
    assert SmoothSplit.for_range(15) is None
    split = SmoothSplit.for_range(10 ** 6)
    assert split.B == int(split.L ** (2 ** -0.5))


def collect(spec):
    got = []
    run_chain(spec, lambda k, d: got.append((k, d)))
    return got


def test_chain_m1():
    spec = ChainSpec.build(1, 20)
    assert collect(spec) == [(q, 0) for q in (2, 3, 5, 7, 11, 13, 17, 19)]


def test_chain_m2():
    spec = ChainSpec.build(2, 30)
    assert collect(spec) == [(2 * q, q - 1) for q in (3, 5, 7, 11, 13)]


def test_chain_m6():
    spec = ChainSpec.build(6, 100)
    assert collect(spec) == [(6 * q, delta_value(6 * q).delta) for q in (7, 11, 13)]


def test_chain_steps():
    spec = ChainSpec.build(6, 100)
    A, w = chain_start(spec, 7)
    assert w == delta_value(42).delta
    w = delta_chain_step(A, w, spec, 7, 11)
    assert w == delta_value(66).delta
    w = delta_chain_step(A, w, spec, 11, 13)
    assert w == delta_value(78).delta
    assert delta_chain_step(A, w, spec, 13, 13) == w
    assert A.popcount() == w


def test_chain_contracts():
    spec = ChainSpec.build(6, 100)
    A, w = chain_start(spec, 7)
    with pytest.raises(ContractError):
        delta_chain_step(A, w, spec, 11, 7)
    with pytest.raises(ContractError):
        delta_chain_step(A, w, spec, 5, 7)
    with pytest.raises(ContractError):
        ChainSpec(6, 5, 13, (1, 2, 3, 6))
    assert ChainSpec.build(50, 100) is None


def test_chain_spot_checks():
    """1000 random (m, q) with q > m prime, m*q <= 10^6."""
    spf = spf_table(10 ** 6)
    rng = random.Random(5)
    done = 0
    while done < 1000:
        m = rng.randint(1, 999)
        spec = ChainSpec.build(m, 10 ** 6, 0, spf)
        if spec is None:
            continue
        got = []
        run_chain(spec, lambda k, d: got.append((k, d)), spf)
        ks = [k for k, _ in got]
        assert ks == sorted(set(ks))
        for k, d in rng.sample(got, min(3, len(got))):
            assert d == delta_value(k, 0, spf).delta, (m, k)
            done += 1


def test_small_tabulation():
    assert list(tabulate_m_subquadratic(10).m_values[1:]) == [1, 3, 6, 9, 14, 18, 25, 30, 36, 42]


def test_matches_incremental_1000():
    a = tabulate_m_subquadratic(1000, debug=True)
    b = tabulate_m(1000)
    assert np.array_equal(a.m_values, b.m_values)


@pytest.mark.parametrize("wheel", [0, 6])
def test_block_coverage_and_paths(wheel):
    n = 60_000
    spf = spf_table(n)
    split = SmoothSplit.for_range(n)
    primes = np.array(primes_in(2, n, spf), dtype=np.int64)
    out, work = compute_block_subquadratic(1, n + 1, split, wheel, spf, primes, workers=2, debug=True)
    ref, _ = compute_deltas(1, n + 1)
    assert np.array_equal(out, ref)
    assert sum(work.counts.values()) == n
    assert work.counts["chain"] > 0 and work.counts["smooth"] > 0


def test_path_classification():
    n = 50_000
    spf = spf_table(n)
    B = SmoothSplit.for_range(n).B
    paths = np.empty(n - 1, dtype=np.int8)
    _classify_block(2, n + 1, B, spf.spf, paths)
    for k in range(2, n + 1):
        q = largest_prime_factor(k, spf)
        want = PATH_SMOOTH if q <= B else PATH_CHAIN if q > k // q else PATH_FALLBACK
        assert paths[k - 2] == want, k
    # a repeated largest prime always falls back
    assert paths[0] == PATH_SMOOTH
    q = primes_in(B + 1, B + 100, spf)[0]
    assert paths[q * q - 2] == PATH_FALLBACK


def test_block_windows_agree():
    n = 20_000
    spf = spf_table(n)
    split = SmoothSplit.for_range(n)
    primes = np.array(primes_in(2, n, spf), dtype=np.int64)
    whole, _ = compute_block_subquadratic(1, n + 1, split, 0, spf, primes)
    parts = [compute_block_subquadratic(lo, min(lo + 3000, n + 1), split, 0, spf, primes, debug=True)[0]
             for lo in range(1, n + 1, 3000)]
    assert np.array_equal(whole, np.concatenate(parts))
