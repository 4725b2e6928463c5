"""Portable seeded randomness for every stochastic step of the pipeline.

The generator is SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter
advanced by the golden-gamma constant, finalized with two xor-multiply
rounds.  It is tiny, passes BigCrush, and -- unlike library generators --
its stream is pinned by this file alone, so machine samples, stimulus
draws, and session shuffles regenerate bit-identically on any platform.

Bounded draws use Lemire's multiply-shift rejection on the high 32 bits,
which is exactly uniform.  ``scenestat.complexity`` carries a numba twin
of these routines; ``tests/test_rng.py`` asserts the two streams match.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche over 64-bit ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(seed: int, index: int) -> int:
    """Sub-stream seed for (seed, index).

    Used for per-batch machine draws and per-session shuffles; distinct
    indexes under one seed give distinct sub-seeds (mix64 is bijective).
    """
    return mix64((mix64(seed) + (index + 1) * GOLDEN_GAMMA) & MASK64)


class SplitMix64:
    """Seeded stream of 64-bit words with unbiased helpers."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return mix64(self._state)

    def next_u32(self) -> int:
        return self.next_u64() >> 32

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n) for 1 <= n <= 2**32 (Lemire, unbiased)."""
        if not 1 <= n <= 1 << 32:
            raise ValueError(f"bound out of range: {n}")
        threshold = ((1 << 32) - n) % n
        while True:
            m = self.next_u32() * n
            if (m & 0xFFFFFFFF) >= threshold:
                return m >> 32

    def random(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]
