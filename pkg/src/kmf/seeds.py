"""Deterministic random-stream derivation.

Every run draws all of its randomness from one root seed.  Independent
consumers (class split, weight init, topic masks, negative sampling,
neighbor sampling, ...) each get a named sub-stream, so disabling or
reordering one consumer never perturbs the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def substream(root_seed: int, name: str, *indices: int) -> np.random.Generator:
    """Return the generator for the ``(name, *indices)`` sub-stream of a root seed.

    The stream identity is (root_seed, crc32(name), *indices); the same tuple
    always yields the same generator state, on any platform.
    """
    tag = zlib.crc32(name.encode("utf-8"))
    entropy = [int(root_seed) & 0xFFFFFFFF, tag]
    entropy.extend(int(i) & 0xFFFFFFFF for i in indices)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
