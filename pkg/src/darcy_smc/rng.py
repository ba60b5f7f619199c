"""Named, reproducible random streams derived from a single root seed.

Every stochastic component draws from its own stream keyed by purpose (and,
where relevant, iteration and particle index), so results do not depend on
scheduling or worker count.
"""

import numpy as np

_STREAM_TAGS = {
    "init": 0,
    "truth": 1,
    "tempering": 2,
    "transition": 3,
    "mutation": 4,
    "reference": 5,
}


def stream(root_seed: int, name: str, *key: int) -> np.random.Generator:
    """Generator for the named stream, e.g. stream(seed, "mutation", n, j)."""
    tag = _STREAM_TAGS[name]
    seq = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(tag, *map(int, key)))
    return np.random.default_rng(seq)
