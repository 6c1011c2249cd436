"""Deterministic random numbers.

Philox is counter-based, so identical seeds give identical draw sequences
on every platform. Substreams are derived by hashing a tag into the second
key word, which keeps independent consumers (per-utterance noise, per-layer
init, per-epoch shuffles) from sharing state.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


class Rng:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._gen = np.random.Generator(
            np.random.Philox(key=[self.seed, self.stream])
        )

    def substream(self, tag) -> "Rng":
        """Independent generator for `tag`, stable across runs."""
        digest = hashlib.blake2b(
            repr((self.stream, tag)).encode("utf-8"), digest_size=8
        ).digest()
        return Rng(self.seed, int.from_bytes(digest, "little"))

    def uniform(self, rows: int, cols: int, low=-1.0, high=1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=(rows, cols))

    def normal(self, rows: int, cols: int, sigma=1.0) -> np.ndarray:
        return self._gen.normal(0.0, sigma, size=(rows, cols))

    def glorot(self, rows: int, cols: int) -> np.ndarray:
        limit = float(np.sqrt(6.0 / (rows + cols)))
        return self.uniform(rows, cols, -limit, limit)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def random(self, size=None):
        return self._gen.random(size=size)
