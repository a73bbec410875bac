"""Seedable, platform-stable PRNG for reproducible sampling.

Implements xoshiro256** (Blackman & Vigna) with SplitMix64 state seeding,
in pure Python. The bit stream is fully determined by the 64-bit seed and
is identical on every platform and Python version, which is what makes
byte-identical sample files possible. Bounded draws use rejection
sampling (no modulo bias) and shuffles are explicit Fisher-Yates, so the
consumed stream never depends on library internals.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1

T = TypeVar("T")


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** generator; 64-bit outputs via :meth:`next_u64`."""

    def __init__(self, seed: int):
        seed &= _MASK64
        state = []
        sm = seed
        for _ in range(4):
            out, sm = _splitmix64(sm)
            state.append(out)
        # All-zero state is unreachable from SplitMix64 seeding, but guard anyway.
        if not any(state):
            state[0] = 1
        self._s = state

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        if n == 1:
            return 0
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (iterating from the last index down)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice() on empty sequence")
        return items[self.randbelow(len(items))]
