"""Seedable random streams.

All randomness flows from one master seed. Named substreams are derived by
hashing the name path into the seed sequence entropy, so the stream used by
e.g. ``("mcmc", "feature", 3)`` does not depend on the order in which other
streams were created.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(names) -> list[int]:
    h = hashlib.sha256("/".join(str(n) for n in names).encode()).digest()
    return [int.from_bytes(h[i:i + 4], "little") for i in range(0, 16, 4)]


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for the named substream of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_name_key(names)])
    return np.random.Generator(np.random.PCG64(ss))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Spawn ``n`` child generators from ``rng``."""
    return rng.spawn(n)
