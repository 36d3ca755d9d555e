"""Seeded randomness helpers.

Everything random in this package draws from numpy's PCG64 generator via
``SeedSequence`` so that fixtures replay bit-identically across platforms
and runs; the platform-default RNG is never used.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Build (or pass through) a PCG64 generator from a seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn(seed: SeedLike, count: int) -> list[np.random.SeedSequence]:
    """Derive ``count`` independent child seed sequences, deterministically."""
    if isinstance(seed, np.random.Generator):
        raise TypeError("spawn needs an int or SeedSequence, not a live generator")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(count)
