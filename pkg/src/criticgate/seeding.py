"""Deterministic seed derivation for trial grids.

A master seed fans out to per-trial seeds through splitmix64, so any single
trial can be reproduced in isolation from (master_seed, trial_index) without
replaying the ones before it.
"""

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def trial_seed(master_seed: int, index: int) -> int:
    """Seed for trial `index` under `master_seed`; O(1), order-free."""
    if index < 0:
        raise ValueError(f"trial index must be >= 0, got {index}")
    return splitmix64((master_seed + (index + 1) * _GAMMA) & _MASK)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
