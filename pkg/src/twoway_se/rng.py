"""Counter-based random streams for reproducible simulation.

Each (seed, replication, component) triple maps to its own Philox stream via
``SeedSequence`` spawn keys, so draws never depend on how replications are
scheduled across workers.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = ["substream", "standard_normal"]

_TWO_POW_M53 = 2.0 ** -53


def substream(seed: int, replication: int, component: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication), int(component)))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(stream: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws by inverting the normal CDF at open-interval uniforms."""
    n = int(np.prod(size))
    raw = stream.bit_generator.random_raw(n)
    # top 53 bits, shifted to the cell midpoint so u is never 0 or 1
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53
    return ndtri(u).reshape(size)
