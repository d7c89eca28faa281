"""Stateless seed derivation: every random draw is keyed by a tuple of ints."""

import hashlib

import numpy as np


def derive_seed(*keys) -> int:
    """Hash an arbitrary tuple of ints/strings into a 63-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for k in keys:
        h.update(repr(k).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") >> 1


def rng_for(*keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*keys))
