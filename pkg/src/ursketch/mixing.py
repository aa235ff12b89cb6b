"""Counter-mode 64-bit mixing used to derive all shared randomness.

Every random object in the package (sketch matrices, level hashes,
permutations, per-trial seeds) is a deterministic function of a 64-bit seed
routed through these helpers, so two parties holding the same seed see the
same objects.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# stream tags keep derived generators independent of each other
TAG_MATRIX = 0x4D41_5452
TAG_LEVELS = 0x4C56_4C53
TAG_WRAP = 0x5752_4150
TAG_PRIORITY = 0x5052_494F
TAG_SUBSAMPLE = 0x5355_4253
TAG_FAMILY = 0x4641_4D49
TAG_PI = 0x5045_524D
TAG_TRIAL = 0x5452_4941


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, *parts: int) -> int:
    """Hash a seed together with integer labels into a fresh 64-bit seed."""
    h = mix64(seed ^ GOLDEN)
    for p in parts:
        h = mix64(h ^ ((p * GOLDEN) & MASK64) ^ (p >> 64))
    return h


def trial_seed(seed: int, t: int) -> int:
    """Seed for trial ``t`` of an experiment run under ``seed``."""
    return derive(seed ^ t, TAG_TRIAL)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def counter_words(seed: int, idx: np.ndarray) -> np.ndarray:
    """Pseudorandom 64-bit word for every counter value in ``idx``."""
    key = np.uint64(mix64(seed))
    ctr = np.asarray(idx, dtype=np.uint64) + np.uint64(1)
    return mix64_array(ctr * np.uint64(GOLDEN) + key)


def generator(seed: int, tag: int) -> np.random.Generator:
    """A numpy Generator for the stream ``tag`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(derive(seed, tag)))
