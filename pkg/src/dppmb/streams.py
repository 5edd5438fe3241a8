"""Seeded, splittable random streams.

Every consumer of randomness derives its own PCG64 generator from the run
seed and a tuple of stream ids, so results never depend on call order across
consumers or on how many threads run the rollouts.
"""

from __future__ import annotations

import numpy as np

ROLLOUT = 0
SELECTION = 1
PICKER = 2
INIT = 3


def stream(seed: int, *ids: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in ids))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
