"""Seeded, splittable random streams.

Every Monte Carlo cell draws from PCG64 seeded by a numpy SeedSequence with the
master seed as entropy and the cell coordinates as spawn key, so a stream
depends only on (seed, key) and never on scheduling order.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.PCG64 seeded by SeedSequence(entropy=seed, spawn_key=cell key)"


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
