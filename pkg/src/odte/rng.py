"""Seed handling shared by every randomized step.

All randomness is driven by 64-bit integer seeds. Child seeds are derived with
:func:`mix`, a SplitMix64 step followed by its avalanche finalizer, so the seed
for item ``i`` depends only on ``(parent_seed, i)`` and never on the order in
which items are processed. Bulk sampling uses numpy's PCG64 generator.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def avalanche(z):
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(seed, index):
    """Derive the child seed number ``index`` of ``seed``."""
    return avalanche((seed & MASK64) + ((index + 1) * GOLDEN_GAMMA))


def generator(seed):
    """PCG64-backed generator for ``seed`` (any integer, reduced mod 2**64)."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return int(seed)
