"""Counter-based random streams (Philox4x32-10), vectorized over streams and counters.

Every draw is a pure function of ``(seed, tag, stream, index)``, so any subset
of an ensemble can be regenerated in any order, on any number of threads, and
come out bit-identical.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy import special

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Raw Philox4x32 block function.

    ``counter`` is a ``(4, ...)`` uint32 array, ``key`` a pair of uint32 scalars
    (or arrays broadcastable against the counter words). Returns ``(4, ...)``
    uint32.
    """
    c0, c1, c2, c3 = (np.asarray(w, dtype=np.uint32) for w in counter)
    k0 = np.asarray(key[0], dtype=np.uint32)
    k1 = np.asarray(key[1], dtype=np.uint32)
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = (k0 + _W0).astype(np.uint32)
                k1 = (k1 + _W1).astype(np.uint32)
            p0 = _M0 * c0.astype(np.uint64)
            p1 = _M1 * c2.astype(np.uint64)
            hi0 = (p0 >> _SHIFT32).astype(np.uint32)
            lo0 = (p0 & _MASK32).astype(np.uint32)
            hi1 = (p1 >> _SHIFT32).astype(np.uint32)
            lo1 = (p1 & _MASK32).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack(np.broadcast_arrays(c0, c1, c2, c3))


def _derive_key(seed: int, tag: str) -> tuple[int, int]:
    digest = hashlib.sha256(f"{int(seed)}:{tag}".encode()).digest()
    return int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:8], "little")


class CounterRNG:
    """Splittable stream family keyed by ``(seed, tag)``.

    ``stream`` selects an independent sequence (path, series, copy ...),
    ``index`` the position inside it (time step, draw purpose ...). Both are
    non-negative integers below 2**64 and broadcast against each other.
    """

    def __init__(self, seed: int, tag: str = ""):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.tag = tag
        self._key = _derive_key(self.seed, tag)

    def child(self, tag: str) -> "CounterRNG":
        return CounterRNG(self.seed, f"{self.tag}/{tag}")

    def _bits(self, stream, index):
        stream, index = np.broadcast_arrays(
            np.asarray(stream, dtype=np.uint64), np.asarray(index, dtype=np.uint64)
        )
        ctr = (
            (index & _MASK32).astype(np.uint32),
            (index >> _SHIFT32).astype(np.uint32),
            (stream & _MASK32).astype(np.uint32),
            (stream >> _SHIFT32).astype(np.uint32),
        )
        return philox4x32(ctr, self._key)

    def uniform(self, stream, index):
        """Doubles in the open interval (0, 1), 53 random bits each."""
        w = self._bits(stream, index)
        hi = w[0].astype(np.uint64) >> np.uint64(5)
        lo = w[1].astype(np.uint64) >> np.uint64(6)
        u = (hi * np.uint64(1 << 26) + lo).astype(np.float64)
        return (u + 0.5) / float(1 << 53)

    def normal(self, stream, index):
        return special.ndtri(self.uniform(stream, index))
