"""Deterministic seed derivation for independent random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
built from ``SeedSequence(seed, spawn_key=keys)``, so results depend only on
the master seed and the stream key, never on scheduling or worker count.
"""

import numpy as np

# Stream tags kept well above any realistic tree index.
SMOTE_STREAM = 0x5EED_0001_0000
FOLD_STREAM = 0x5EED_0002_0000
SPLIT_STREAM = 0x5EED_0003_0000
JOB_STREAM = 0x5EED_0004_0000


def _sequence(seed: int, keys) -> np.random.SeedSequence:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and stream keys must be non-negative")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit seed for the stream ``keys`` under ``seed``."""
    return int(_sequence(seed, keys).generate_state(1, np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(_sequence(seed, keys))
