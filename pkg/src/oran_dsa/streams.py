"""Named, independent RNG streams derived from the scenario seed.

Each purpose gets its own stream keyed by (seed, purpose, *indices), so
changing one scheme (say, random coloring) never shifts the draws used for
traffic, placement, mobility or fading.
"""

import numpy as np

TRAFFIC = 1
POPULATION = 2
MOBILITY = 3
FADING = 4
COLORING = 5


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), purpose, *(int(k) for k in keys)])


def derive_seed(seed: int, index: int) -> int:
    """Seed for sweep point ``index`` of a sweep run from base ``seed``."""
    return int(np.random.SeedSequence([int(seed), 0x5EE9, int(index)]).generate_state(1)[0])
