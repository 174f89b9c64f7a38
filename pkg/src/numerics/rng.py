"""Portable pseudo-random numbers: xoshiro256** seeded through SplitMix64.

Every random draw in the pipeline (parameter init, shuffling, defect
placement) goes through this generator so equal seeds give bit-identical
results on every platform.
"""

from typing import List, Sequence, Tuple

import numpy as np

MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class SplitMix64:
    """SplitMix64 generator, used only to expand a seed into xoshiro state."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** 1.0 generator."""

    def __init__(self, seed: int = 0):
        """Seed the four state words from SplitMix64(seed).

        Args:
            seed: Unsigned 64-bit seed
        """
        mixer = SplitMix64(seed)
        self.s: List[int] = [mixer.next_u64() for _ in range(4)]

    @classmethod
    def from_state(cls, state: Sequence[int]) -> "Xoshiro256":
        """Rebuild a generator from exported state words."""
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256** state must be four words, not all zero")
        rng = cls.__new__(cls)
        rng.s = [int(word) & MASK64 for word in state]
        return rng

    @property
    def state(self) -> Tuple[int, int, int, int]:
        return tuple(self.s)

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64

        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def integers(self, low: int, high: int) -> int:
        """Integer in [low, high) by multiply-shift reduction."""
        span = high - low
        if span <= 0:
            raise ValueError(f"Empty integer range [{low}, {high})")
        return low + ((self.next_u64() * span) >> 64)

    def permutation(self, n: int) -> List[int]:
        """Fisher-Yates shuffle of range(n)."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def uniform_array(self, low: float, high: float, size: int) -> np.ndarray:
        """Array of `size` uniform draws, in draw order."""
        return np.array([self.uniform(low, high) for _ in range(size)], dtype=np.float64)

    def numpy_generator(self) -> np.random.Generator:
        """A numpy Generator for bulk noise, seeded from the next draw."""
        return np.random.Generator(np.random.PCG64(self.next_u64()))
