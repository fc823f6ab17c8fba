"""Seedable, splittable random streams.

Each stream owns a ``random.Random`` (arbitrary-precision ``randrange``)
seeded from a numpy ``SeedSequence``; ``spawn`` derives independent child
streams for workers, so results depend only on the master seed and the
worker count.
"""

from __future__ import annotations

import random

import numpy as np


class RandomStream:
    __slots__ = ("seed_seq", "_py", "randrange", "random")

    def __init__(self, seed=None):
        if isinstance(seed, np.random.SeedSequence):
            self.seed_seq = seed
        else:
            self.seed_seq = np.random.SeedSequence(seed)
        words = self.seed_seq.generate_state(8, dtype=np.uint32)
        self._py = random.Random(int.from_bytes(words.tobytes(), "little"))
        # bound methods: these sit on the hot path of the samplers
        self.randrange = self._py.randrange
        self.random = self._py.random

    @property
    def entropy(self):
        return self.seed_seq.entropy

    def randint(self, a: int, b: int) -> int:
        """Uniform integer in [a, b]."""
        return a + self._py.randrange(b - a + 1)

    def spawn(self, n: int) -> list["RandomStream"]:
        return [RandomStream(s) for s in self.seed_seq.spawn(n)]

    def numba_seed(self) -> int:
        """A 32-bit seed for numba's per-thread generator."""
        return int(self._py.getrandbits(32))
