"""Seed splitting for reproducible parallel repetitions."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def split_seed(master: int, index: int) -> int:
    """Child seed for repetition ``index``: ``mix64(master XOR mix64(index + 1))``."""
    return mix64((int(master) & _MASK64) ^ mix64(int(index) + 1))


def split_seeds(master: int, n: int) -> list[int]:
    return [split_seed(master, i) for i in range(n)]


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
