"""Named RNG substreams.

Every stochastic operation derives its generator from ``(root seed, component
path)``, so adding a new component never perturbs the draws of existing ones,
and identical seeds give bit-identical results regardless of call order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "spawn"]


def _path_words(path) -> list[int]:
    words = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFFFFFFFFFF)
        else:
            digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
            words.append(int.from_bytes(digest, "little"))
    return words


def substream(seed: int, *path) -> np.random.Generator:
    """Generator for the substream named by ``path`` under ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + _path_words(path)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def spawn(seed: int, *path, count: int) -> list[np.random.Generator]:
    """``count`` mutually independent generators under one named substream."""
    return [substream(seed, *path, k) for k in range(count)]
