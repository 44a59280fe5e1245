"""Deterministic named sub-streams derived from one master seed.

Every random choice in the package flows through here, so campaigns,
searches and attack trials can be re-run independently and results never
depend on worker count or evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_rng(seed: int, *parts) -> np.random.Generator:
    """Generator for the sub-stream named by `parts` (strings or ints)."""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF]
    for p in parts:
        if isinstance(p, str):
            entropy.append(zlib.crc32(p.encode()))
        else:
            entropy.append(int(p) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(entropy)


def random_word(rng: np.random.Generator, width: int) -> int:
    """Uniform integer in [0, 2^width)."""
    if width <= 0:
        raise ValueError("width must be positive")
    word = 0
    remaining = width
    while remaining > 0:
        take = min(remaining, 32)
        word = (word << take) | int(rng.integers(0, 1 << take))
        remaining -= take
    return word


def splitmix64(x: int) -> int:
    """Stateless 64-bit mixer; used for per-plaintext deterministic coins."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)
