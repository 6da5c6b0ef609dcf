"""Deterministic random-number streams.

All randomness in the package flows through Philox, a counter-based
generator. Independent streams are derived by hashing (seed, purpose tag,
index) into a Philox key, so any consumer — a chain, the variational noise
source, the train/test splitter — gets its own stream that depends only on
those three values. Reordering or parallelising consumers can never change
the numbers a given consumer sees.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Return the Philox stream identified by (seed, tag, index)."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    digest = hashlib.sha256(f"{seed}:{tag}:{int(index)}".encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
