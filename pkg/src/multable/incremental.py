"""delta(n) by marking the divisor-rectangle shape, with optional wheel.

delta(n) counts the multiples m*n (1 <= m <= n) that already occur in the
(n-1) x (n-1) table, so M(n) = M(n-1) + n - delta(n).  Each divisor pair
(g, n/g) contributes the rectangle i < g, j < n/g; the distinct products in
the union of those rectangles are exactly the m counted by delta(n).

With a wheel modulus w the products are split by residue class mod w.  In
class r every value up to C_r is known to lie in the shape, so those are
counted arithmetically and only products above C_r are marked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import CapacityError, ContractError
from .numtheory import (
    BitVector,
    DivisorPairList,
    SpfTable,
    divisor_pairs,
    popcount_and_clear,
    small_divisors_into,
    spf_table,
)

WHEELS = (0, 1, 2, 6, 12, 60)
MAX_SMALL_DIVISORS = 4096


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _delta_plain(n, smalls, l, words):
    """Returns (delta, cells marked).  Uses and re-zeroes bits [0, n)."""
    if l <= 1:
        return 0, 0
    dl = smalls[l - 1]
    k = 0
    cells = 0
    for i in range(1, dl):
        if i == smalls[k]:
            k += 1
        b = n // smalls[k]
        p = i * i
        for _ in range(i, b):
            words[p >> 6] |= np.uint64(1) << np.uint64(p & 63)
            p += i
        if b > i:
            cells += b - i
    return popcount_and_clear(words, (n >> 6) + 1), cells


@nb.njit(cache=True, nogil=True)
def _wheel_thresholds(n, smalls, l, w, C):
    """Fill C[r] = max g*(bound_g - 1) over rows g | w with g | r."""
    for r in range(w):
        C[r] = 0
    dl = smalls[l - 1]
    k = 0
    for g in range(1, min(dl, w + 1)):
        if g == smalls[k]:
            k += 1
        if w % g == 0:
            v = g * (n // smalls[k] - 1)
            for r in range(0, w, g):
                if v > C[r]:
                    C[r] = v


@nb.njit(cache=True, nogil=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@nb.njit(cache=True, nogil=True)
def _mark_row_checked(i, j, b, w, stride, C, words):
    cells = 0
    p = i * j
    for _ in range(j, b):
        r = p % w
        if p > C[r]:
            idx = r * stride + p // w
            words[idx >> 6] |= np.uint64(1) << np.uint64(idx & 63)
            cells += 1
        p += i
    return cells


@nb.njit(cache=True, nogil=True)
def _delta_wheel(n, smalls, l, w, words, C):
    """Returns (delta, cells marked).

    Class r owns bits [r*stride, (r+1)*stride) with the product p stored at
    offset p // w.  Every bit used is re-zeroed before returning.
    """
    if l <= 1:
        return 0, 0
    _wheel_thresholds(n, smalls, l, w, C)
    counted = 0
    cmin = C[0]
    for r in range(w):
        c = C[r]
        if r == 0:
            counted += c // w
        elif c >= r:
            counted += (c - r) // w + 1
        if c < cmin:
            cmin = c
    stride = n // w + 2
    dl = smalls[l - 1]
    k = 0
    cells = 0
    for i in range(1, dl):
        if i == smalls[k]:
            k += 1
        b = n // smalls[k]
        if i <= w and w % i == 0:
            continue
        jlo = cmin // i + 1
        if jlo < i:
            jlo = i
        if jlo >= b:
            continue
        g = _gcd(i, w)
        step = w // g
        if b - jlo < 2 * step:
            cells += _mark_row_checked(i, jlo, b, w, stride, C, words)
            continue
        # j = j0 + t*step all land in one class; offsets advance by i // g
        inc = i // g
        for j0 in range(jlo, jlo + step):
            p = i * j0
            r = p % w
            c = C[r]
            j = j0
            if p <= c:
                # smallest j in the progression with i*j > c
                t = (c // i + 1 - j0 + step - 1) // step
                j = j0 + t * step
            if j >= b:
                continue
            idx = r * stride + (i * j) // w
            cnt = (b - j + step - 1) // step
            for _ in range(cnt):
                words[idx >> 6] |= np.uint64(1) << np.uint64(idx & 63)
                idx += inc
            cells += cnt
    marked = popcount_and_clear(words, ((w * stride) >> 6) + 1)
    return counted + marked, cells


@nb.njit(cache=True, nogil=True)
def _delta_any(n, smalls, l, w, words, C):
    if w == 0:
        return _delta_plain(n, smalls, l, words)
    return _delta_wheel(n, smalls, l, w, words, C)


@nb.njit(cache=True, nogil=True)
def _tabulate_range(k_lo, k_hi, spf, w, out, cells_out):
    """out[k - k_lo] = delta(k) for k_lo <= k < k_hi; returns cells marked."""
    words = np.zeros(((max(w, 1) * (k_hi // max(w, 1) + 2)) >> 6) + 2, dtype=np.uint64)
    smalls = np.empty(MAX_SMALL_DIVISORS, dtype=np.int64)
    primes = np.empty(64, dtype=np.int64)
    exps = np.empty(64, dtype=np.int64)
    C = np.zeros(max(w, 1), dtype=np.int64)
    total = 0
    for k in range(max(k_lo, 1), k_hi):
        if k == 1:
            out[k - k_lo] = 0
            continue
        l = small_divisors_into(k, spf, smalls, primes, exps)
        d, c = _delta_any(k, smalls, l, w, words, C)
        out[k - k_lo] = d
        cells_out[k - k_lo] = c
        total += c
    return total


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaRecord:
    n: int
    delta: int
    constructed: int


@dataclass
class WheelConfig:
    """Per-n wheel state: thresholds C_r and the class-partitioned bit store.

    Class r occupies bits [r * stride, (r + 1) * stride) of ``storage``;
    product p of class r lives at offset p // w.
    """

    n: int
    w: int
    thresholds: np.ndarray
    storage: BitVector = field(repr=False)

    @property
    def stride(self) -> int:
        return self.n // self.w + 2

    @classmethod
    def for_pairs(cls, D: DivisorPairList, w: int) -> "WheelConfig":
        if w not in WHEELS or w == 0:
            raise ValueError(f"wheel modulus must be one of {WHEELS[1:]}")
        n = D.n
        C = np.zeros(w, dtype=np.int64)
        if len(D) > 1:
            _wheel_thresholds(n, D.smalls, len(D), w, C)
        return cls(n, w, C, BitVector(w * (n // w + 2) + 64))

    def class_bits(self, r: int) -> np.ndarray:
        """Bits of the residue-class-r vector, as a 0/1 array."""
        start = r * self.stride
        bits = np.unpackbits(self.storage.words.view(np.uint8), bitorder="little")
        return bits[start:start + self.stride]

    def arithmetic_counts(self) -> list[int]:
        """Per class, how many values <= C_r are counted without marking."""
        out = []
        for r, c in enumerate(int(x) for x in self.thresholds):
            if r == 0:
                out.append(c // self.w)
            else:
                out.append((c - r) // self.w + 1 if c >= r else 0)
        return out


def _checked_pairs(n: int, D: DivisorPairList, require_complete: bool) -> np.ndarray:
    if D.n != n:
        raise ContractError(f"divisor list is for {D.n}, not {n}")
    if require_complete and not D.is_complete():
        raise ContractError(f"divisor list for {n} is incomplete")
    return D.smalls


def delta(n: int, D: DivisorPairList, scratch: BitVector | None = None,
          require_complete: bool = True) -> DeltaRecord:
    """delta(n) by marking the shape bounded by the pairs in D.

    With ``require_complete=False`` a partial list is accepted and the
    result is a lower bound on delta(n).
    """
    smalls = _checked_pairs(n, D, require_complete)
    if n <= 1:
        return DeltaRecord(n, 0, 0)
    if scratch is None:
        scratch = BitVector(n)
    if scratch.length < n:
        raise CapacityError(f"scratch vector of length {scratch.length} is shorter than {n}")
    d, cells = _delta_plain(n, smalls, len(smalls), scratch.words)
    scratch.invalidate_weight()
    return DeltaRecord(n, int(d), int(cells))


def delta_wheel(n: int, D: DivisorPairList, cfg: WheelConfig | int) -> DeltaRecord:
    """delta(n) counting runs below the per-class thresholds arithmetically."""
    smalls = _checked_pairs(n, D, True)
    if isinstance(cfg, int):
        if cfg == 0:
            return delta(n, D)
        cfg = WheelConfig.for_pairs(D, cfg)
    if cfg.n != n:
        raise ContractError(f"wheel config is for {cfg.n}, not {n}")
    if len(D) <= 1:
        # 1 and primes: the shape is empty
        return DeltaRecord(n, 0, 0)
    d, cells = _delta_wheel(n, smalls, len(smalls), cfg.w, cfg.storage.words,
                            np.zeros(cfg.w, dtype=np.int64))
    cfg.storage.invalidate_weight()
    return DeltaRecord(n, int(d), int(cells))


def constructed_count(n: int, w: int = 0, spf: SpfTable | None = None) -> int:
    """Cells that perform a mark when computing delta(n) (w = 0: no wheel)."""
    spf = spf or spf_table(n)
    D = divisor_pairs(n, spf)
    rec = delta(n, D) if w == 0 else delta_wheel(n, D, w)
    return rec.constructed


def delta_value(n: int, w: int = 0, spf: SpfTable | None = None) -> DeltaRecord:
    """Convenience wrapper building the divisor list from the spf table."""
    spf = spf or spf_table(n)
    D = divisor_pairs(n, spf)
    return delta(n, D) if w == 0 else delta_wheel(n, D, w)


def compute_deltas(k_lo: int, k_hi: int, wheel: int = 0, spf: SpfTable | None = None):
    """(deltas, cells) arrays for k in [k_lo, k_hi)."""
    if wheel not in WHEELS:
        raise ValueError(f"wheel modulus must be one of {WHEELS}")
    spf = spf or spf_table(k_hi)
    spf.check(k_hi - 1)
    out = np.zeros(k_hi - k_lo, dtype=np.int64)
    cells = np.zeros(k_hi - k_lo, dtype=np.int64)
    _tabulate_range(k_lo, k_hi, spf.spf, wheel, out, cells)
    return out, cells


def tabulate_m(n_max: int, wheel: int = 0, workers: int = 1, checkpoint=None, **kwargs):
    """Tabulate delta(k) and M(k) for 1 <= k <= n_max.

    Extra keyword arguments (``out``, ``checkpoint_path``,
    ``checkpoint_every``, ``progress``) go to
    :func:`multable.tabulation.run_tabulation`.
    """
    from .tabulation import run_tabulation

    return run_tabulation(n_max, algorithm="incremental", wheel=wheel, workers=workers,
                          checkpoint=checkpoint, **kwargs)


def wheel_classes(n: int, w: int, spf: SpfTable | None = None) -> list[tuple[int, list[int]]]:
    """Per residue class r: (values counted arithmetically, sorted marked products).

    Plain-Python walk of the same shape as the compiled wheel kernel; meant
    for inspection and tests on small n.
    """
    if w not in WHEELS or w == 0:
        raise ValueError(f"wheel modulus must be one of {WHEELS[1:]}")
    spf = spf or spf_table(n)
    D = divisor_pairs(n, spf)
    cfg = WheelConfig.for_pairs(D, w)
    arith = cfg.arithmetic_counts()
    marked = [set() for _ in range(w)]
    smalls = [int(s) for s in D.smalls]
    k = 0
    for i in range(1, smalls[-1]):
        if i == smalls[k]:
            k += 1
        if i <= w and w % i == 0:
            continue
        for j in range(i, n // smalls[k]):
            p = i * j
            if p > cfg.thresholds[p % w]:
                marked[p % w].add(p)
    return [(arith[r], sorted(marked[r])) for r in range(w)]
