"""Seed derivation.

Every run owns a single 64-bit seed.  Components never share a generator;
instead each one derives its own sub-seed from the run seed and a *path*
of names/indices, e.g. ``derive_seed(seed, "bag", 3, "boost")``.  The
derivation goes through :class:`numpy.random.SeedSequence` with the path
as its spawn key, so changing one path never perturbs another.  String
path elements are mapped to integers with CRC-32.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"seed path elements must be non-negative, got {part}")
    return int(part)


def derive_seed(seed: int, *path: int | str) -> int:
    """Return a 64-bit sub-seed of ``seed`` for the given path."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *path: int | str) -> np.random.Generator:
    """A fresh generator for ``derive_seed(seed, *path)``."""
    return np.random.default_rng(derive_seed(seed, *path) if path else int(seed) & MASK64)
