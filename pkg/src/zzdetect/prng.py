"""Deterministic randomness shared by every seeded operation.

All sampling in this package flows through Philox, a counter-based 64-bit
generator whose output is fixed by the algorithm (not by platform word size
or library entropy pooling), keyed directly with a 64-bit FNV-1a hash of the
caller's (seed, purpose) tuple. Given the same key the bit stream is
identical across runs and platforms.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

HashPart = int | str | bytes


def fnv1a64(*parts: HashPart) -> int:
    """64-bit FNV-1a over the parts, with a separator so groupings differ.

    Strings hash as UTF-8, ints as 8 little-endian bytes (taken mod 2**64).
    """
    h = _FNV_OFFSET
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
        elif isinstance(part, (bytes, bytearray)):
            data = bytes(part)
        elif isinstance(part, (int, np.integer)):
            data = (int(part) & _MASK64).to_bytes(8, "little")
        else:
            raise TypeError(f"cannot hash part of type {type(part).__name__}")
        for b in data:
            h ^= b
            h = (h * _FNV_PRIME) & _MASK64
        h ^= 0xFF
        h = (h * _FNV_PRIME) & _MASK64
    return h


def philox(*key_parts: HashPart) -> np.random.Generator:
    """Philox generator keyed by fnv1a64(*key_parts), bypassing SeedSequence."""
    return np.random.Generator(np.random.Philox(key=fnv1a64(*key_parts)))
