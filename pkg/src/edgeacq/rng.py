"""Named, independently derived random substreams.

Every consumer of randomness owns a stream keyed by (root seed, purpose,
device/replicate ids). Streams derived from distinct keys are independent,
so the interleaving of draws across devices or policies cannot change any
result.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    value = int(key)
    if value < 0:
        raise ValueError(f"stream keys must be non-negative, got {value}")
    return value


def substream(root: int, *keys) -> np.random.Generator:
    """Generator for the substream identified by (root, *keys)."""
    entropy = [_key_to_int(root)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
