"""Seed derivation.

All randomness comes from one user seed. Independent streams are keyed by
hashing (seed, stream, index) through SplitMix64, and each derived 64-bit
value seeds a numpy PCG64 generator. Items therefore draw the same numbers
regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    h = splitmix64(seed & _MASK)
    for k in keys:
        h = splitmix64(h ^ (k & _MASK))
    return h


# stream identifiers
STREAM_POSE = 1
STREAM_GUIDE = 2


def generator(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
