"""Counter-based seed derivation.

Every stage draws its randomness from ``derive_seed(master, stage, k)``,
a pure function of the master seed and a small key path, so any stage can
be rerun alone and reproduce the same stream.
"""
import zlib

import numpy as np

STAGES = {"isogen": 1, "points": 2, "embed": 3, "select": 4, "baseline": 5, "design": 6, "dataset": 7}


def _key(part):
    if isinstance(part, str):
        return STAGES.get(part, zlib.crc32(part.encode()))
    return int(part)


def derive_seed(master, *keys):
    """64-bit seed for the key path ``keys`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))
