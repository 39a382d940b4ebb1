"""Seeded random numbers from a 64-bit linear congruential generator.

All sampling in this package goes through :class:`Lcg` rather than
``numpy.random`` so that a seed reproduces bit-identical streams on any
platform, and so a port in another language can replay the exact same
draws.  Constants are Knuth's MMIX multiplier/increment.
"""

from __future__ import annotations

import math

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1
_TWO53 = float(1 << 53)


class Lcg:
    """state' = (a * state + c) mod 2^64; uniforms use the top 53 bits."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK64
        return self.state

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u / _TWO53)

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        return [self.uniform(lo, hi) for _ in range(n)]

    def normal(self) -> float:
        # Box-Muller; guard against log(0)
        u1 = max(self.uniform(), 1.0 / _TWO53)
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def choice_sign(self) -> int:
        return 1 if (self.next_u64() >> 63) == 0 else -1

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (inclusive)."""
        span = hi - lo + 1
        return lo + self.next_u64() % span
