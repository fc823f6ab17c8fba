import time

import pytest

from conftest import brute_m_sequence, brute_products
from multable.direct import (
    SegmentPlan,
    brute_force_m,
    m_direct,
    m_direct_segmented,
    m_exact_direct,
)
from multable.errors import CapacityError, DomainError


@pytest.mark.parametrize("n,expected", [(1, 1), (3, 6), (4, 9), (5, 14)])
def test_small_values(n, expected):
    assert brute_force_m(n) == expected
    assert m_direct(n) == expected


def test_brute_force_matches_set():
    for n in range(0, 60):
        assert brute_force_m(n) == len(brute_products(n))


def test_direct_equals_brute_force_to_2000():
    bf = brute_m_sequence(2000)
    for n in (1, 2, 17, 360, 1999, 2000):
        assert brute_force_m(n) == bf[n]
    for n in range(1, 2001):
        assert m_direct(n) == bf[n]


def test_segmented_equals_direct_to_2000():
    for n in range(1, 2001, 7):
        bits = -(-n // 64) * 64
        assert m_direct_segmented(SegmentPlan(n, bits)) == m_direct(n)
        assert m_direct_segmented(SegmentPlan(n, bits + 64 * (n % 5))) == m_direct(n)


def test_one_segment():
    plan = SegmentPlan(100, 100 * 100 + 48)
    assert plan.segments == 1
    assert m_direct_segmented(plan) == m_direct(100)


def test_segmented_workers():
    plan = SegmentPlan(1000, 1 << 20)
    assert m_direct_segmented(plan, workers=4) == m_direct(1000)
    small = SegmentPlan(1000, 1024)
    assert m_direct_segmented(small, workers=3) == m_direct(1000)


def test_monotone():
    prev = 0
    for n in range(1, 500):
        cur = m_direct(n)
        assert cur > prev
        prev = cur


def test_segment_plan_validation():
    with pytest.raises(ValueError):
        SegmentPlan(100, 100)  # not word aligned
    with pytest.raises(ValueError):
        SegmentPlan(1000, 512)  # shorter than one row
    with pytest.raises(DomainError):
        SegmentPlan(0, 64)


def test_capacity_guards():
    with pytest.raises(CapacityError):
        m_direct(1 << 17, memory_bits=1 << 30)
    with pytest.raises(CapacityError):
        brute_force_m(10 ** 5)
    with pytest.raises(DomainError):
        m_direct(0)


def test_exact_dispatch():
    assert m_exact_direct(300) == m_exact_direct(300, segment_bits=320) == brute_force_m(300)


def test_quadratic_growth():
    """Doubling n multiplies the direct sweep time by about 4.

    Single doublings can reach ~8x where the working set leaves a cache
    level, so the check uses the mean ratio over 2^10 .. 2^13.
    """
    m_exact_direct(64, segment_bits=64)

    def best(n):
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            m_direct_segmented(SegmentPlan.default(n))
            times.append(time.perf_counter() - t0)
        return min(times)

    ts = [best(1 << k) for k in range(10, 14)]
    ratios = [b / a for a, b in zip(ts, ts[1:])]
    mean = (ts[-1] / ts[0]) ** (1 / 3)
    print("direct doubling ratios", [f"{r:.2f}" for r in ratios], f"mean {mean:.2f}")
    assert 3 <= mean <= 6
