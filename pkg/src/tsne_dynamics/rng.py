"""Seeded random streams.

All randomness goes through numpy's Philox counter-based generator keyed by
a ``SeedSequence``. Independent sub-streams (e.g. the two coordinate columns
of a random initialization) come from ``SeedSequence.spawn``, so results are
portable across platforms and numpy versions that keep Philox stable.
"""

import numpy as np

GENERATOR_NAME = "numpy.random.Philox(SeedSequence)"


def make_rng(seed):
    """Philox generator for ``seed``; an existing Generator passes through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, count):
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
