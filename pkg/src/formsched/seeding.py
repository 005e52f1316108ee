"""Deterministic derivation of per-episode RNG seeds from a master seed.

Episode e of a run uses ``derive_seed(master_seed, e)`` so that any episode
can be reproduced in isolation, and so that different schedulers compared
under the same master seed consume identical noise realizations.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 scrambling round. Bijective on 64-bit integers."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, stream: int) -> int:
    """Mix a master seed with a stream index (e.g. episode number).

    The mix is ``splitmix64(master XOR stream * golden_ratio_64)``, which
    decorrelates consecutive stream indices far beyond what feeding
    ``master + stream`` to the generator would.
    """
    master_seed = int(master_seed)
    stream = int(stream)     # numpy integers would overflow below
    if stream < 0:
        raise ValueError("stream index must be >= 0")
    x = (master_seed ^ ((stream * _GOLDEN) & _MASK64)) & _MASK64
    return splitmix64(x)


def episode_rng(master_seed: int, episode: int) -> np.random.Generator:
    """RNG for one episode; all in-episode randomness comes from this stream."""
    return np.random.default_rng(derive_seed(master_seed, episode))
