"""Derived seeds.

All randomness flows from one master seed. A derived seed for the key tuple
``(k1, k2, ...)`` is the first 64-bit word of
``numpy.random.SeedSequence(entropy=master, spawn_key=(k1, k2, ...))``,
masked to 63 bits. Generators are ``numpy.random.default_rng(seed)``
(PCG64); Gaussian variates come from numpy's ziggurat sampler.
"""
from __future__ import annotations

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] & np.uint64(2**63 - 1))


def rng_for(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
