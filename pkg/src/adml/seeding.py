"""Deterministic seed derivation.

Every random decision in the harness draws from a numpy Generator seeded by
mixing a 64-bit master seed with a stream index through the splitmix64
finalizer. Split i therefore gets the same RNG stream no matter in which
order (or on how many workers) the splits are executed.
"""

import numpy as np

_MASK = (1 << 64) - 1

# fixed stream offsets, so different uses of the same master seed never collide
STREAM_OUTER_SPLIT = 0x0000_0000_0000_0000
STREAM_INNER_FOLDS = 0x1000_0000_0000_0000
STREAM_FOREST_RETRAIN = 0x2000_0000_0000_0000
STREAM_BALANCE = 0x3000_0000_0000_0000
STREAM_SYNTH = 0x4000_0000_0000_0000


def splitmix64(x: int) -> int:
    """One step of the splitmix64 avalanche function (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix_seed(master_seed: int, stream: int) -> int:
    """Derive a child seed from a master seed and a stream index."""
    return splitmix64(splitmix64(master_seed & _MASK) ^ (stream & _MASK))


def rng_for(master_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(mix_seed(master_seed, stream))
