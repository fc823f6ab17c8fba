import math

import pytest

from multable.numtheory import spf_table


@pytest.fixture(scope="session")
def spf():
    return spf_table(1 << 20)


def brute_products(n):
    return {i * j for i in range(1, n + 1) for j in range(1, n + 1)}


def brute_m_sequence(n_max):
    """[M(0), M(1), ..., M(n_max)] from one growing set of products."""
    seen = set()
    out = [0]
    for n in range(1, n_max + 1):
        seen.update(i * n for i in range(1, n + 1))
        out.append(len(seen))
    return out


def brute_delta(n):
    """Multiples of n already in the (n-1) x (n-1) table."""
    prev = brute_products(n - 1)
    return sum(1 for m in range(1, n + 1) if m * n in prev)


def sieve(limit):
    is_p = bytearray([1]) * (limit + 1)
    is_p[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if is_p[p]:
            is_p[p * p::p] = bytearray(len(is_p[p * p::p]))
    return is_p



def brute_deltas(n_max):
    """delta[0..n_max] by keeping a presence flag for every product seen so far."""
    import numpy as np

    present = np.zeros(n_max * n_max + 1, dtype=bool)
    out = np.zeros(n_max + 1, dtype=np.int64)
    for n in range(1, n_max + 1):
        row = np.arange(1, n + 1, dtype=np.int64) * n
        out[n] = int(present[row].sum())
        present[row] = True
    return out


# one pass/fail line per acceptance criterion in the terminal summary
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n = mark.args[0]
    ok = rep.passed and _CRITERIA.get(n, (True,))[0]
    _CRITERIA[n] = (ok, item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, name = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({name})")
