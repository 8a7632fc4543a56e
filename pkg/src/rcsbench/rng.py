"""Deterministic, counter-based random streams.

Every stochastic component derives its own stream from (master_seed, *path)
so that circuits, trajectories, and replications are reproducible and safe
to generate in any order or in parallel.
"""
from __future__ import annotations

import numpy as np

__all__ = ["spawn_rng", "derive_seed"]


def spawn_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream (master_seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed=ss))


def derive_seed(master_seed: int, *path: int) -> int:
    """A plain integer seed derived from (master_seed, *path), for serialization."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(2, dtype=np.uint64)[0])
