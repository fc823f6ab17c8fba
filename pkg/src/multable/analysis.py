"""Normalization of M(n)/n^2 by Phi(n) and report tables.

Phi(n) = (log n)^c (log log n)^(3/2) with c = 1 - (1 + log log 2)/log 2,
so (n^2 / M(n)) / Phi(n) stays bounded away from 0 and infinity.  Huge n
of the form 2^k - 1 are handled through log n alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Integral
from typing import Iterable, List, Optional

import numpy as np

from .errors import DomainError

C = 1 - (1 + math.log(math.log(2))) / math.log(2)
LN2 = math.log(2)


@dataclass(frozen=True)
class NormalizationParams:
    c: float = C

    def phi_from_log(self, log_n: float) -> float:
        """Phi given log n (natural log)."""
        if log_n <= 1:
            raise DomainError("Phi needs n > e so that log log n > 0")
        return log_n ** self.c * math.log(log_n) ** 1.5


def log_of(n: Optional[int] = None, n_exponent: Optional[int] = None) -> float:
    """Natural log of n, or of 2^k - 1 when only the exponent k is given."""
    if n_exponent is not None:
        k = int(n_exponent)
        if k < 1:
            raise DomainError("n_exponent must be positive")
        # log(2^k - 1) = k log 2 + log(1 - 2^-k)
        return k * LN2 + math.log1p(-math.ldexp(1.0, -k)) if k < 1075 else k * LN2
    if n is None or n < 1:
        raise DomainError("n must be a positive integer")
    return math.log(n)


def phi(n: Optional[int] = None, *, n_exponent: Optional[int] = None) -> float:
    """Phi(n) with natural logs; pass ``n_exponent=k`` for n = 2^k - 1."""
    return NormalizationParams().phi_from_log(log_of(n, n_exponent))


def normalized_ratio(n: Optional[int], value, *, n_exponent: Optional[int] = None) -> float:
    """(n^2 / M) / Phi(n).

    ``value`` is either the exact count M (an integer) or the ratio
    M / n^2 (a float, e.g. a Monte Carlo estimate).
    """
    if value <= 0:
        raise DomainError("M must be positive")
    log_n = log_of(n, n_exponent)
    if isinstance(value, Integral):
        if n is None:
            n = (1 << int(n_exponent)) - 1
        # exact integers can exceed float range; go through logs
        log_ratio = 2 * math.log(n) - math.log(int(value))
        return math.exp(log_ratio) / NormalizationParams().phi_from_log(log_n)
    return (1.0 / float(value)) / NormalizationParams().phi_from_log(log_n)


def crossover_log2() -> float:
    """log2 of the n below which (log log n)^(3/2) varies faster than (log n)^c.

    |A'/A| < |B'/B| with A = x^c, B = (log x)^(3/2), x = log n holds for
    x < exp(3 / (2c)).
    """
    return math.exp(3 / (2 * C)) / LN2


# --------------------------------------------------------------------------
# report rows
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    n: Optional[int]
    n_exponent: Optional[int]
    ratio_over_n2: float
    sigma: Optional[float]
    normalized: Optional[float]
    M: Optional[int] = None

    def label(self) -> str:
        return str(self.n) if self.n is not None else f"2^{self.n_exponent}-1"


def rows_from_table(table: np.ndarray, normalized: bool = True,
                    dyadic_only: bool = False) -> List[ReportRow]:
    """Rows from a (k, delta, M) array; Phi needs k > e, so normalized is
    None for k <= 2."""
    out = []
    for k, _, M in table.tolist():
        if dyadic_only and (k + 1) & k:
            continue
        norm = normalized_ratio(k, int(M)) if normalized and k > 2 else None
        out.append(ReportRow(k, None, M / (k * k), None, norm, int(M)))
    return out


def row_from_estimate(report) -> ReportRow:
    log_args = dict(n_exponent=report.n_exponent) if report.n_exponent is not None else {}
    n = report.n if report.n_exponent is None else None
    norm = None
    if report.estimate > 0 and log_of(n, report.n_exponent) > 1:
        norm = normalized_ratio(n, float(report.estimate), **log_args)
    return ReportRow(n, report.n_exponent, report.estimate, report.sigma, norm)


def format_rows(rows: Iterable[ReportRow], normalized: bool = True) -> str:
    """CSV text; reals to 4 decimals, exact integers in full."""
    head = ["n", "M", "M/n^2", "1e4*sigma"]
    if normalized:
        head.append("(n^2/M)/Phi")
    lines = [",".join(head)]
    for r in rows:
        cells = [r.label(), "" if r.M is None else str(r.M), f"{r.ratio_over_n2:.4f}",
                 "" if r.sigma is None else f"{1e4 * r.sigma:.2f}"]
        if normalized:
            cells.append("" if r.normalized is None else f"{r.normalized:.4f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
