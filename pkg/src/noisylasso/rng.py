"""Seeded, splittable random streams.

Every generator in the package draws from a Philox (counter-based) bit
generator. Integer seeds are the unit of reproducibility: a trial records
one integer and every sub-stream it needs is derived from it.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed=None) -> np.random.Generator:
    """Return a Philox-backed Generator from an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def child_seeds(seed: int, n: int) -> list[int]:
    """Split ``seed`` into ``n`` independent integer seeds."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for c in children]


def trial_seed(master_seed: int, cell: int, trial: int) -> int:
    """Deterministic per-trial seed, independent of execution order."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(cell, trial))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
