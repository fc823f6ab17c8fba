"""Block-wise delta/M tabulation with CSV output and checkpoint/resume.

Both tabulators (plain/wheel marking per k, and the chain-based one)
produce delta(k) for a block of consecutive k; this module runs the
blocks in order, appends ``k,delta,M`` rows, and after every block
records a checkpoint so an interrupted run can resume and still produce a
byte-identical file.
"""

from __future__ import annotations

import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from .checkpoint import TabulationCheckpoint
from .errors import DomainError, StaleCheckpointError
from .incremental import WHEELS, _tabulate_range
from .numtheory import spf_table

CSV_HEADER = "k,delta,M\n"
ALGORITHMS = ("incremental", "subquadratic")
THREADS_ENV = "MULTABLE_THREADS"
DEFAULT_BLOCK = 1 << 16


def default_workers() -> int:
    """Thread count from $MULTABLE_THREADS, else 1."""
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class TabulationResult:
    """delta(k) and M(k) indexed directly by k; slot 0 holds 0 (M(0) = 0)."""

    n_max: int
    deltas: np.ndarray
    m_values: np.ndarray
    algorithm: str = "incremental"
    wheel: int = 0
    work: Dict[str, int] = field(default_factory=dict)

    def delta(self, k: int) -> int:
        return int(self.deltas[k])

    def m(self, k: int) -> int:
        return int(self.m_values[k])

    @property
    def final_m(self) -> int:
        return int(self.m_values[self.n_max])

    def identity_holds(self) -> bool:
        """M(k) = (k^2 + k)/2 - sum_{j <= k} delta(j) for every k."""
        k = np.arange(self.n_max + 1, dtype=np.int64)
        return bool(np.array_equal(self.m_values, (k * k + k) // 2 - np.cumsum(self.deltas)))


def m_from_deltas(deltas: np.ndarray) -> np.ndarray:
    """Running M(k) from delta(k) (both indexed by k, slot 0 = 0)."""
    k = np.arange(deltas.shape[0], dtype=np.int64)
    gains = k - deltas
    gains[0] = 0
    return np.cumsum(gains)


def format_rows(lo: int, deltas: np.ndarray, m_values: np.ndarray) -> str:
    return "".join(f"{k},{d},{m}\n" for k, d, m in
                   zip(range(lo, lo + deltas.shape[0]), deltas.tolist(), m_values.tolist()))


def parse_csv(text: str) -> np.ndarray:
    """Parse ``k,delta,M`` text into an int64 array of rows (k, delta, M)."""
    if not text.startswith(CSV_HEADER):
        raise ValueError("not a k,delta,M table: header missing")
    body = text[len(CSV_HEADER):]
    if not body.strip():
        return np.zeros((0, 3), dtype=np.int64)
    return np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)


def read_csv(path, limit_bytes: int | None = None) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read() if limit_bytes is None else fh.read(limit_bytes)
    return parse_csv(raw.decode("ascii"))


# --------------------------------------------------------------------------
# block producers
# --------------------------------------------------------------------------

class _IncrementalBlocks:
    def __init__(self, n_max, wheel, workers, spf):
        self.wheel, self.workers, self.spf = wheel, workers, spf
        self.cells = 0

    def __call__(self, lo, hi):
        out = np.zeros(hi - lo, dtype=np.int64)
        cells = np.zeros(hi - lo, dtype=np.int64)
        parts = 1 if self.workers == 1 else 4 * self.workers
        edges = [lo + (hi - lo) * i // parts for i in range(parts + 1)]

        def run(i):
            a, b = edges[i], edges[i + 1]
            if a < b:
                _tabulate_range(a, b, self.spf.spf, self.wheel, out[a - lo:b - lo], cells[a - lo:b - lo])

        if parts == 1:
            run(0)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(run, range(parts)))
        self.cells += int(cells.sum())
        return out

    def work(self):
        return {"cells": self.cells}


class _SubquadraticBlocks:
    def __init__(self, n_max, wheel, workers, spf, gamma=None, debug=False):
        from .subquadratic import BlockWork, SmoothSplit

        self.split = SmoothSplit.for_range(n_max, gamma)
        self.wheel, self.workers, self.spf, self.debug = wheel, workers, spf, debug
        idx = np.arange(n_max + 1, dtype=np.int64)
        self.primes = idx[2:][spf.spf[2:n_max + 1] == idx[2:]]
        self.total = BlockWork.empty()

    def __call__(self, lo, hi):
        from .subquadratic import compute_block_subquadratic

        out, work = compute_block_subquadratic(lo, hi, self.split, self.wheel, self.spf,
                                               self.primes, self.workers, self.debug)
        self.total.merge(work)
        return out

    def work(self):
        w = {f"{k}_cells": v for k, v in self.total.cells.items()}
        w.update({f"{k}_count": v for k, v in self.total.counts.items()})
        w["cells"] = self.total.total_cells
        if self.split is not None:
            w["B"] = self.split.B
        return w


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def _open_output(out):
    """(writer, path or None)."""
    if out is None:
        return None, None
    if out == "-":
        return sys.stdout, None
    if hasattr(out, "write"):
        return out, None
    return None, str(out)


def run_tabulation(n_max: int, algorithm: str = "incremental", wheel: int = 0,
                   workers: int | None = None, checkpoint: TabulationCheckpoint | None = None,
                   out=None, checkpoint_path=None, checkpoint_every: int | None = None,
                   progress: Optional[Callable[[int, int], None]] = None,
                   gamma: float | None = None, debug: bool = False) -> TabulationResult:
    """Tabulate delta(k), M(k) for 1 <= k <= n_max.

    ``out`` is a path, ``"-"`` for stdout, a writable text stream, or None.
    With ``checkpoint_path`` a checkpoint is written after every block of
    ``checkpoint_every`` values of k; if the file already exists the run
    resumes from it.  ``progress(last_k, n_max)`` is called after each
    committed block.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if wheel not in WHEELS:
        raise ValueError(f"wheel modulus must be one of {WHEELS}")
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if checkpoint_every is not None and checkpoint_every < 1:
        raise ValueError("checkpoint_every must be positive")

    stream, out_path = _open_output(out)
    if (checkpoint is not None or checkpoint_path is not None) and out_path is None:
        raise ValueError("checkpointing needs the output written to a file path")
    if checkpoint is None and checkpoint_path is not None and Path(checkpoint_path).exists():
        checkpoint = TabulationCheckpoint.load(checkpoint_path)

    deltas = np.zeros(n_max + 1, dtype=np.int64)
    start = 1
    if checkpoint is not None:
        checkpoint.check_matches(n_max, wheel, algorithm, out_path)
        start = _restore(checkpoint, deltas) + 1

    spf = spf_table(n_max)
    if algorithm == "incremental":
        producer = _IncrementalBlocks(n_max, wheel, workers, spf)
        block = checkpoint_every or DEFAULT_BLOCK
    else:
        producer = _SubquadraticBlocks(n_max, wheel, workers, spf, gamma, debug)
        block = checkpoint_every or n_max

    fh = None
    if out_path is not None:
        if checkpoint is not None:
            fh = open(out_path, "r+")
            fh.seek(checkpoint.output_bytes)
            fh.truncate()
        else:
            fh = open(out_path, "w")
            fh.write(CSV_HEADER)
        stream = fh
    elif stream is not None:
        stream.write(CSV_HEADER)

    dsum = int(deltas[:start].sum())
    try:
        lo = start
        while lo <= n_max:
            hi = min(lo + block, n_max + 1)
            deltas[lo:hi] = producer(lo, hi)
            if stream is not None:
                m_prev = (lo - 1) * lo // 2 - dsum
                ks = np.arange(lo, hi, dtype=np.int64)
                m_block = m_prev + np.cumsum(ks - deltas[lo:hi])
                stream.write(format_rows(lo, deltas[lo:hi], m_block))
                stream.flush()
            dsum += int(deltas[lo:hi].sum())
            if checkpoint_path is not None:
                os.fsync(fh.fileno())
                TabulationCheckpoint(n_max, wheel, algorithm, hi - 1, dsum, out_path,
                                     fh.tell()).save(checkpoint_path)
            if progress is not None:
                progress(hi - 1, n_max)
            lo = hi
    finally:
        if fh is not None:
            fh.close()

    return TabulationResult(n_max, deltas, m_from_deltas(deltas), algorithm, wheel, producer.work())


def _restore(ck: TabulationCheckpoint, deltas: np.ndarray) -> int:
    """Load delta(1..last_k) from the partial CSV; returns last_k."""
    path = Path(ck.output_path)
    if not path.exists():
        raise StaleCheckpointError(f"checkpointed output {path} is missing")
    size = path.stat().st_size
    if size < ck.output_bytes:
        raise StaleCheckpointError(
            f"{path} has {size} bytes, fewer than the {ck.output_bytes} checkpointed")
    rows = read_csv(path, limit_bytes=ck.output_bytes)
    if rows.shape[0] != ck.last_k or (ck.last_k and rows[-1, 0] != ck.last_k):
        raise StaleCheckpointError("checkpointed output does not end at last_k")
    deltas[1:ck.last_k + 1] = rows[:, 1]
    if int(rows[:, 1].sum()) != ck.partial_delta_sum:
        raise StaleCheckpointError("delta sum in the output disagrees with the checkpoint")
    return ck.last_k
