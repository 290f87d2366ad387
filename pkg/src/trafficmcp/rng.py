"""Seeded random streams backing every demand generator.

The generator is SplitMix64 (Steele, Lea & Flood, 2014): a 64-bit counter
advanced by the golden-gamma constant, finalized with two xorshift
multiplies. It is small, fast, and fully pinned down below so that an
independent implementation can reproduce identical trip tables:

    state  = (state + 0x9E3779B97F4A7C15) mod 2**64
    z      = state
    z      = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z      = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output = z ^ (z >> 31)

Sub-streams are derived from a root seed and a string label: the label is
hashed with 64-bit FNV-1a, xored into the seed, and the result is pushed
through one SplitMix64 step. Floats in [0, 1) take the top 53 output bits
scaled by 2**-53; bounded integers use the multiply-shift reduction
``(u * n) >> 64`` (Lemire), which avoids platform-dependent rejection
loops.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


class Stream:
    """One SplitMix64 stream; deterministic given its seed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) via multiply-shift reduction."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        return (self.next_u64() * n) >> 64

    def choice(self, seq):
        if not seq:
            raise ValueError("choice on empty sequence")
        return seq[self.randrange(len(seq))]

    def weighted_index(self, weights) -> int:
        """Index drawn proportionally to non-negative weights."""
        total = 0.0
        for w in weights:
            if w < 0:
                raise ValueError("negative weight")
            total += w
        if total <= 0:
            raise ValueError("weights sum to zero")
        x = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if x < acc:
                return i
        return len(weights) - 1


def stream(seed: int, label: str) -> Stream:
    """Sub-stream derived from a root seed and a purpose label."""
    return Stream(_mix((seed & _MASK) ^ _fnv1a(label)))
