"""Seeded, platform-independent randomness.

Every stochastic choice in this package (row/feature subsampling, random
splits, synthetic data) flows through :class:`SplitMix64`, a tiny fixed
algorithm, so that a single 64-bit seed reproduces a run exactly on any
machine regardless of numpy version.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_TWO53_INV = 1.0 / (1 << 53)


def _mix(x: int) -> int:
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1) & _MASK
    x ^= x >> 27
    x = (x * _MIX2) & _MASK
    x ^= x >> 31
    return x


class SplitMix64:
    """splitmix64: a Weyl sequence (increment by an odd constant) plus a
    bit-mixing finalizer.

    Because the state advances by a fixed constant per draw, a block of n
    draws is a closed-form function of the draw index, which lets the block
    methods run vectorized in numpy while producing the exact stream the
    scalar methods produce.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    # -- scalar draws ------------------------------------------------------

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO53_INV

    def randbelow(self, n: int) -> int:
        """One integer in [0, n). Plain modulo; the tiny bias is irrelevant
        here and the construction is identical on every platform."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        return self.next_u64() % n

    # -- vectorized blocks (same stream as the scalar API) -----------------

    def u64_block(self, n: int) -> np.ndarray:
        ks = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA) + np.uint64(
            self._state
        )
        z = ks
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        self._state = (self._state + n * _GAMMA) & _MASK
        return z

    def uniform_open_block(self, n: int) -> np.ndarray:
        """n doubles in (0, 1]; the right-open variant would break log()."""
        return ((self.u64_block(n) >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO53_INV

    def normal_block(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on two uniform blocks."""
        m = (n + 1) // 2
        u1 = self.uniform_open_block(m)
        u2 = self.uniform_open_block(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:n]

    # -- sampling ----------------------------------------------------------

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        arr = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            arr[i], arr[j] = arr[j], arr[i]
        return arr

    def sample_sorted(self, n: int, k: int) -> np.ndarray:
        """k distinct integers from range(n), ascending (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        arr = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.randbelow(n - i)
            arr[i], arr[j] = arr[j], arr[i]
        out = arr[:k]
        out.sort()
        return out

    def spawn(self, index: int) -> "SplitMix64":
        """Decorrelated child stream for parallel-safe per-unit generation."""
        return SplitMix64(_mix(self._state + (index + 1) * _GAMMA))
