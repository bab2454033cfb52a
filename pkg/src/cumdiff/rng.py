"""Seeded, counter-based random streams.

Every random draw in the package comes from numpy's Philox generator keyed
through a SeedSequence built from a user seed plus a stream path, so separate
uses (the main perturbation, each ATE replicate, Monte Carlo) get independent
substreams that do not depend on call order.
"""

import numpy as np

ALGORITHM = 'numpy.random.Philox-4x64-10 via numpy.random.SeedSequence'
DEFAULT_SEED = 543216789


def make_generator(seed, *stream):
    """Generator for the substream `stream` of `seed` (an unsigned 64-bit int)."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError('seed must be an unsigned 64-bit integer')
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
