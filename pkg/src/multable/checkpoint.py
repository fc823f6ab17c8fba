"""Resumable state for long delta/M tabulation runs.

A checkpoint is a small JSON document.  It records how far the CSV output
is known to be complete (``last_k`` and the byte length at that point), so
a resumed run can cut off any rows written after the last checkpoint and
carry on producing byte-identical output.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import StaleCheckpointError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TabulationCheckpoint:
    n_max: int
    wheel: int
    algorithm: str
    last_k: int
    partial_delta_sum: int
    output_path: str
    output_bytes: int
    version: int = CHECKPOINT_VERSION

    def __post_init__(self):
        if not 0 <= self.last_k <= self.n_max:
            raise StaleCheckpointError(
                f"checkpoint last_k={self.last_k} outside [0, {self.n_max}]")

    @property
    def m_last(self) -> int:
        """M(last_k) recovered from the running delta sum."""
        k = self.last_k
        return (k * k + k) // 2 - self.partial_delta_sum

    def to_text(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TabulationCheckpoint":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StaleCheckpointError(f"unreadable checkpoint: {exc}") from exc
        if raw.get("version") != CHECKPOINT_VERSION:
            raise StaleCheckpointError(
                f"checkpoint version {raw.get('version')!r}, expected {CHECKPOINT_VERSION}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise StaleCheckpointError(f"malformed checkpoint: {exc}") from exc

    def save(self, path) -> None:
        """Write atomically so a crash never leaves a half-written file."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w") as fh:
            fh.write(self.to_text())
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "TabulationCheckpoint":
        return cls.from_text(Path(path).read_text())

    def check_matches(self, n_max: int, wheel: int, algorithm: str, output_path: str) -> None:
        problems = []
        if self.n_max != n_max:
            problems.append(f"n_max {self.n_max} != {n_max}")
        if self.wheel != wheel:
            problems.append(f"wheel {self.wheel} != {wheel}")
        if self.algorithm != algorithm:
            problems.append(f"algorithm {self.algorithm!r} != {algorithm!r}")
        if os.path.abspath(self.output_path) != os.path.abspath(output_path):
            problems.append(f"output {self.output_path!r} != {output_path!r}")
        if problems:
            raise StaleCheckpointError("checkpoint does not match this run: " + "; ".join(problems))
