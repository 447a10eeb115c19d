"""Deterministic seed derivation.

A single master seed fans out to per-dataset and per-snapshot seeds through a
splittable counter scheme (splitmix64). The snapshot at index i always sees
the same seed regardless of chunking, execution order, or thread count, so a
dataset is a pure function of (master seed, index range).
"""

from __future__ import annotations

import numpy as np

SCHEME = "splitmix64-v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive(master: int, *path: int) -> int:
    """Derive a child seed from a master seed and a tuple of counters.

    The master is mixed before any counter is folded in, so nearby integer
    masters (0, 1, 2, ...) still fan out to unrelated streams.
    """
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(master & 0xFFFFFFFFFFFFFFFF))
        for p in path:
            z = _mix(z + _GAMMA * (np.uint64(p & 0xFFFFFFFFFFFFFFFF) + np.uint64(1)))
        return int(z)


def snapshot_seeds(dataset_seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized per-index seeds for snapshots [start, start+count).

    Each index advances an independent splitmix64 stream whose state is
    ``mix(seed) + (i + 1) * gamma``; distinct (seed, index) pairs collide only
    with the generic birthday probability, never structurally.
    """
    with np.errstate(over="ignore"):
        base = _mix(np.uint64(dataset_seed & 0xFFFFFFFFFFFFFFFF))
        idx = np.arange(start, start + count, dtype=np.uint64)
        return _mix(base + _GAMMA * (idx + np.uint64(1)))
