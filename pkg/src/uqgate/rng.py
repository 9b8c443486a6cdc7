"""Deterministic seed derivation for order-independent Monte Carlo.

Replicates, episodes, and generator runs each get their own 64-bit seed
derived from a master seed and an integer path, so results never depend on
evaluation order or worker count.

The mixing function is the splitmix64 finalizer. Bit-exact definition, all
arithmetic mod 2**64::

    mix(x):
        x = x + 0x9E3779B97F4A7C15
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
        x = (x ^ (x >> 27)) * 0x94D049BB133111EB
        return x ^ (x >> 31)

    derive_seed(seed, c1, c2, ..., cn):
        z = mix(seed)
        for c in (c1 .. cn):  z = mix(z ^ mix(c))
        return z

Uniform draws derived from a seed value v are ``(v >> 11) * 2**-53``,
i.e. the top 53 bits scaled to [0, 1).
"""

from __future__ import annotations

import struct

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer of a 64-bit integer (see module docstring)."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Derive a 64-bit sub-seed from a master seed and an integer path.

    Deterministic, order-sensitive in the path components, and independent
    of any RNG state, so disjoint paths can be evaluated in any order or in
    parallel with identical results.
    """
    z = mix64(seed & _MASK)
    for component in path:
        z = mix64(z ^ mix64(component & _MASK))
    return z


def float_bits(x: float) -> int:
    """IEEE-754 bit pattern of a double, for floats used as path components."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def spawn_rng(seed: int, *path: int) -> np.random.Generator:
    """A numpy Generator seeded with ``derive_seed(seed, *path)``."""
    return np.random.default_rng(derive_seed(seed, *path))


def _mix64_np(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    return x ^ (x >> np.uint64(31))


def uniform_field(seed: int, *path: int, n: int) -> np.ndarray:
    """Uniform [0, 1) draws for items 0..n-1 under one derived path.

    Element ``i`` equals the scalar recipe
    ``(derive_seed(seed, *path, i) >> 11) * 2**-53`` — the vectorization is
    an implementation detail, not a different stream.
    """
    base = np.uint64(derive_seed(seed, *path))
    idx = np.arange(n, dtype=np.uint64)
    z = _mix64_np(base ^ _mix64_np(idx))
    return (z >> np.uint64(11)) * np.float64(2.0**-53)
