"""Seeded random streams.

Every random draw in the package comes from a Philox generator keyed by a
SeedSequence, so ``stream(seed, k)`` and ``stream(seed, k')`` are independent
substreams and results never depend on scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) & 0xFFFFFFFFFFFFFFFF for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def stable_seed(*parts) -> int:
    """63-bit seed from blake2b over the '|'-joined ``str`` of each part.

    Unlike ``hash()`` this is identical across processes and Python versions.
    """
    text = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
