"""Seeded random streams.

Every stream is a numpy ``Generator`` over the PCG64 bit generator, keyed by a
``SeedSequence``. PCG64 output is specified bit-for-bit, so equal seeds give
equal draws on every platform running the same numpy release.
"""

from __future__ import annotations

import hashlib

import numpy as np

ALGORITHM = "numpy.PCG64/SeedSequence"
VERSION_TAG = f"{ALGORITHM}@numpy-{np.__version__}"


class SeededRng:
    """Single-owner random stream with named, independent child streams."""

    def __init__(self, seed: int, *, _seq: np.random.SeedSequence | None = None):
        if _seq is None:
            if seed < 0 or seed >= 2**64:
                raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
            _seq = np.random.SeedSequence(int(seed))
        self.seed = int(seed)
        self._seq = _seq
        self.generator = np.random.Generator(np.random.PCG64(_seq))

    @property
    def version(self) -> str:
        return VERSION_TAG

    def child(self, name: str) -> "SeededRng":
        """Derive an independent stream labelled by ``name``.

        The child depends only on the parent seed and the name, never on how
        many draws the parent has made.
        """
        key = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")
        seq = np.random.SeedSequence(self._seq.entropy, spawn_key=(*self._seq.spawn_key, key))
        return SeededRng(self.seed, _seq=seq)

    def uniform(self, lo: float, hi: float, size=None):
        return self.generator.uniform(lo, hi, size)

    def normal(self, mean: float, sd: float, size=None):
        return self.generator.normal(mean, sd, size)

    def choice(self, values, p, size=None):
        return self.generator.choice(values, size=size, p=p)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, spawn_key={self._seq.spawn_key})"
