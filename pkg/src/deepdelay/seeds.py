"""Deterministic seed derivation for parallel-safe work units.

Every randomized operation in the package draws from a generator seeded by
(base_seed, unit path), so serial and concurrent execution of independent
units (sequences, layers, folds, offspring) produce identical streams.
"""

import numpy as np

_U64 = 2**64


def derive_seed(base_seed: int, *path: int) -> int:
    """64-bit seed derived from ``base_seed`` and an integer index path.

    The path length is folded into the entropy because SeedSequence ignores
    trailing zero words, which would otherwise alias (b,) with (b, 0).
    """
    entropy = [len(path), int(base_seed) % _U64] + [int(p) % _U64 for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def rng_from(seed: int) -> np.random.Generator:
    """Generator for a (possibly negative) 64-bit seed."""
    return np.random.default_rng(int(seed) % _U64)
