"""Deterministic random streams keyed by (seed, index...).

A stream depends only on the master seed and its integer key, never on the
order in which streams are requested or on how many threads consume them.
"""

from __future__ import annotations

import numpy as np

__all__ = ["MAX_SEED", "check_seed", "generator", "derive_seed"]

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def generator(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A child 64-bit seed for sub-experiment ``key`` of ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
