"""Named random streams derived from a single run seed.

Each consumer (shuffle, dropout, init, synth, ...) asks for its own stream by
name, so adding a new consumer never shifts the draws seen by existing ones.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def stream(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for ``name`` under run ``seed``."""
    ss = np.random.SeedSequence([seed & _MASK64, fnv1a_64(name.encode("utf-8"))])
    return np.random.Generator(np.random.PCG64(ss))
