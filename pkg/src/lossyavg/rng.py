"""Seeded random streams.

Every stochastic routine takes a master seed and derives independent
substreams from ``(seed, *key)`` through :class:`numpy.random.SeedSequence`,
so results do not depend on execution order or thread count.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, index: int) -> int:
    """A 64-bit child seed for run ``index`` of a master seed."""
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
