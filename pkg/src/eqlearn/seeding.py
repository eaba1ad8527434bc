"""Deterministic RNG derivation. Every random stream in the package flows
from integer keys through `derive_rng`; nothing reads wall-clock entropy."""

from __future__ import annotations

import numpy as np


def derive_seedseq(*keys: int) -> np.random.SeedSequence:
    """Build a SeedSequence from a tuple of non-negative integer keys."""
    flat = []
    for k in keys:
        if k is None:
            raise ValueError("seed keys must be integers, got None")
        flat.append(int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.SeedSequence(entropy=tuple(flat))


def derive_rng(*keys: int) -> np.random.Generator:
    """PCG64 generator deterministically derived from integer keys."""
    return np.random.Generator(np.random.PCG64(derive_seedseq(*keys)))


def derive_seed(*keys: int) -> int:
    """Collapse keys to a single 63-bit integer seed (for recording)."""
    return int(derive_seedseq(*keys).generate_state(1, np.uint64)[0] >> np.uint64(1))
