import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from conftest import brute_m_sequence
from multable.errors import CapacityError, DomainError
from multable.montecarlo import (
    EstimateReport,
    bernoulli_estimate,
    count_divisors_in_range,
    divisor_in_range,
    estimate,
    exact_expectations,
    exact_moments,
    exact_variance_check,
    multiplicity,
    multiplicity_histogram,
    product_estimate,
)
from multable.numtheory import spf_table
from multable.rng import RandomStream
from multable.sampler import FactoredInt


def fint(z, spf=None):
    spf = spf or spf_table(max(z, 2))
    return FactoredInt(z, tuple(spf.factorize(z))) if z > 1 else FactoredInt.one()


def test_divisor_in_range_examples():
    assert divisor_in_range(fint(91), 10, 10) is False
    assert divisor_in_range(fint(36), 4, 10) is True
    assert divisor_in_range(fint(1), 1, 1) is True


def test_count_examples():
    assert multiplicity(fint(36), 10) == 3
    assert count_divisors_in_range(fint(36), 4, 10) == 3
    assert multiplicity(fint(12), 4) == 2
    for n in (1, 7, 30, 1000):
        assert multiplicity(fint(n * n), n) == 1
    assert multiplicity(fint(97), 10) == 0
    with pytest.raises(DomainError):
        count_divisors_in_range(fint(12), 5, 4)


def test_multiplicity_against_brute_force():
    spf = spf_table(10 ** 6)
    rng = random.Random(21)
    for _ in range(10_000):
        n = rng.randint(1, 1000)
        z = rng.randint(1, n * n)
        want = sum(1 for i in range(max(1, -(-z // n)), n + 1) if z % i == 0 and z // i <= n)
        assert multiplicity(fint(z, spf), n) == want


def test_histogram_against_counter():
    for n in (1, 2, 10, 77, 300):
        c = Counter(Counter(i * j for i in range(1, n + 1) for j in range(1, n + 1)).values())
        h = multiplicity_histogram(n)
        assert {int(v): int(h[v]) for v in np.nonzero(h)[0]} == dict(c)


def test_exact_expectations_are_unbiased():
    ms = brute_m_sequence(50)
    for n in range(1, 51):
        bern, prod = exact_expectations(n)
        assert bern == prod == Fraction(ms[n], n * n)
    assert exact_expectations(2) == (Fraction(3, 4), Fraction(3, 4))
    with pytest.raises(CapacityError):
        exact_expectations(51)


def test_exact_variances_small():
    assert exact_variance_check(1) == (0, 0)
    assert exact_variance_check(2, 1) == (Fraction(1, 16), Fraction(3, 16))
    assert exact_variance_check(2, 4) == (Fraction(1, 64), Fraction(3, 64))
    p, e2 = exact_moments(300)
    vp, vb = exact_variance_check(300)
    assert vp == e2 - p * p and vb == p * (1 - p)


def test_n_equals_one():
    r = bernoulli_estimate(1, 50, 1)
    assert r.estimate == 1.0 and r.variance == 0.0
    assert product_estimate(1, 50, 1).estimate == 1.0


@pytest.mark.parametrize("method", ["product", "bernoulli"])
@pytest.mark.parametrize("sampler", ["bach", "kalai"])
def test_small_n_calibration(method, sampler):
    # M(30) = 308
    r = estimate(30, 40_000, method, 17, sampler=sampler)
    assert abs(r.estimate - 308 / 900) <= 4 * r.sigma


def test_python_path_calibration():
    # the exact big-integer procedures, forced at a size the compiled paths also cover
    n = (1 << 13) + 1
    p, _ = exact_moments(n)
    for method in ("bernoulli", "product"):
        r = estimate(n, 3000, method, 3, engine="python")
        assert abs(r.estimate - float(p)) <= 4 * r.sigma
    r = estimate((1 << 40) - 1, 300, "product", 3, n_exponent=40)
    assert 0.05 < r.estimate < 0.3


@pytest.mark.parametrize("method", ["product", "bernoulli"])
@pytest.mark.parametrize("sampler", ["bach", "kalai"])
def test_word_engine_calibration(method, sampler):
    n = 1000
    p, _ = exact_moments(n)
    r = estimate(n, 100_000, method, 23, sampler=sampler, engine="word")
    assert abs(r.estimate - float(p)) <= 4 * r.sigma
    # n^2 above the table path: auto selects the word engine
    n = (1 << 13) + 1
    p, _ = exact_moments(n)
    r = estimate(n, 20_000, method, 24, sampler=sampler)
    assert abs(r.estimate - float(p)) <= 4 * r.sigma


def test_engine_checks():
    with pytest.raises(ValueError):
        estimate(10, 10, engine="gpu")
    with pytest.raises(DomainError):
        estimate(1 << 32, 10, engine="word")


def test_deterministic_under_seed():
    a = estimate(10 ** 5, 3000, "product", 99, workers=2)
    b = estimate(10 ** 5, 3000, "product", 99, workers=2)
    assert (a.estimate, a.variance) == (b.estimate, b.variance)
    c = estimate(2 ** 40 - 1, 300, "bernoulli", 5)
    d = estimate(2 ** 40 - 1, 300, "bernoulli", 5)
    assert c.successes == d.successes


def test_bernoulli_variance_scale_2_30():
    """T * variance approaches p(1-p) = 1.459e-7 * 10^6 at n = 2^30 - 1."""
    T = 20_000
    r = estimate((1 << 30) - 1, T, "bernoulli", 30, n_exponent=30)
    assert r.variance * T == pytest.approx(0.1459, rel=0.05)
    assert abs(r.estimate - 0.17738) <= 4 * r.sigma


def test_report_round_trip():
    r = estimate(1000, 500, "product", 4)
    back = EstimateReport.from_text(r.to_text())
    assert back == r
    big = estimate((1 << 64) - 1, 20, "bernoulli", 4, n_exponent=64)
    text = big.to_text()
    assert '"n": null' in text and '"n_exponent": 64' in text
    assert EstimateReport.from_text(text).n_value == (1 << 64) - 1


def test_argument_checks():
    with pytest.raises(DomainError):
        estimate(10, 1, "product")
    with pytest.raises(ValueError):
        estimate(10, 10, "median")
    with pytest.raises(ValueError):
        estimate(10, 10, "product", sampler="other")
