"""
Seed derivation for replications.

A replication's randomness is a numpy SeedSequence keyed by (base seed,
replication index); each consumer (data, transforms, coins, calibration pool)
spawns its own child key, so adding replications or changing one consumer
never perturbs another.
"""

from typing import List, Optional, Tuple, Union

import numpy as np

SeedLike = Union[None, int, np.random.SeedSequence]

# child keys of a replication seed
DATA = 0
TRANSFORMS = 1
COINS = 2
CALIBRATION = 3


def replication_seed(base_seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(rep,))


def child(seed: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))


def make_generator(seed: SeedLike) -> np.random.Generator:
    """Counter-based generator from an int, a SeedSequence or None"""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def resolve_seeds(base_seed: int, n_reps: int, seeds: Optional[List[int]] = None) -> List[Tuple[int, int, np.random.SeedSequence]]:
    """(rep index, reported seed, SeedSequence) for every replication"""
    if seeds:
        return [(rep, int(s), np.random.SeedSequence(int(s))) for rep, s in enumerate(seeds)]
    return [(rep, base_seed + rep, replication_seed(base_seed, rep)) for rep in range(n_reps)]
