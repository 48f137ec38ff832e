"""Seeded random streams.

All randomness goes through numpy's counter-based Philox bit generator.
Independent substreams are derived with ``SeedSequence.spawn``, so the
stream for realization ``k`` depends only on ``(seed, k)`` and never on
the order in which realizations are evaluated. Normal variates come from
``Generator.standard_normal`` (numpy's ziggurat method).
"""

import numpy as np


def make_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n):
    """Return ``n`` independent generators derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
