"""Counter-based random streams split from a single master seed.

Every stream is a Philox generator seeded by
``SeedSequence(master_seed, spawn_key=(replica, case, stream_id))``, so
any (replica, case, purpose) triple can be regenerated in isolation and
replicas can run in any order or in parallel.
"""
from __future__ import annotations

import numpy as np

STREAM_IDS = {
    "record": 0,         # inputs and noise of the similar-plant record
    "sketch": 1,         # historical compression matrix
    "online-sketch": 2,  # per-step sketch rows c_t
    "plant": 3,          # process noise of the actual plant
    "explore": 4,        # exploration inputs of the baseline
}

# case index used by streams that are shared across all grid cases
SHARED_CASE = 2**31 - 1


def stream(master_seed: int, name: str, replica: int = 0, case: int = SHARED_CASE) -> np.random.Generator:
    """Independent generator for one purpose of one replica/case."""
    try:
        sid = STREAM_IDS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(STREAM_IDS)}") from None
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replica), int(case), sid))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
