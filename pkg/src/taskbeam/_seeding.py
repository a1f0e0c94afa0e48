"""Seed normalisation shared by the stochastic routines."""

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a ``SeedSequence`` or ``None`` (fresh entropy).

    A ``SeedSequence`` argument is copied, so spawning from the result always
    starts at child 0 and repeated calls with the same object agree.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)
