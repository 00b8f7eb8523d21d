"""Deterministic 64-bit seed derivation.

Child seeds come from the splitmix64 output function applied to
``master + (index + 1) * GOLDEN`` (mod 2**64), i.e. the (index+1)-th
element of the splitmix64 stream anchored at ``master``.  The mixing
function is fixed so datasets and training runs are reproducible from a
single recorded master seed.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One application of the splitmix64 output function."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def child_seed(master: int, index: int) -> int:
    """Seed for the index-th independent child stream of ``master``."""
    if index < 0:
        raise ValueError("child index must be non-negative")
    return splitmix64((master + (index + 1) * _GOLDEN) & _MASK)


def rng_from(master: int, *indices: int) -> np.random.Generator:
    """PCG64 generator for a (possibly nested) child of ``master``."""
    seed = master & _MASK
    for i in indices:
        seed = child_seed(seed, i)
    return np.random.default_rng(seed)
