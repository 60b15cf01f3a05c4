"""Counter-based pseudorandom streams for reproducible parallel simulation.

Every random draw in this package comes from a SplitMix64-style stream:
output ``i`` of a stream with key ``K`` is ``mix64(K + i * GOLDEN)``.
Because the output is a pure function of (key, counter), independent trial
streams can be derived from (master seed, stream index) without sharing
state, and the same sequence is reproduced by the numba kernels.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanching mix of a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_key(key: int, index: int) -> int:
    """Key of child stream ``index`` of the stream with the given key."""
    return mix64(key ^ mix64((index + GOLDEN) & MASK64))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """A single deterministic random stream.

    Not thread-safe; one instance per trial / per oracle.  ``derive``
    produces a statistically independent child stream, leaving the parent
    untouched.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    def derive(self, index: int) -> "CounterRng":
        return CounterRng(derive_key(self.key, index))

    def derive_key(self, index: int) -> int:
        return derive_key(self.key, index)

    def child_key(self) -> int:
        """A fresh independent key, consuming one step of this stream."""
        self.counter += 1
        word = mix64((self.key + self.counter * GOLDEN) & MASK64)
        return mix64(word ^ 0xD1B54A32D192ED03)

    def _raw(self, size: int) -> np.ndarray:
        """Next ``size`` raw 64-bit words as a uint64 array."""
        start = self.counter + 1
        self.counter += size
        counters = np.arange(start, start + size, dtype=np.uint64)
        words = np.uint64(self.key) + counters * np.uint64(GOLDEN)
        return _mix64_array(words)

    def uniform(self) -> float:
        self.counter += 1
        word = mix64((self.key + self.counter * GOLDEN) & MASK64)
        return (word >> 11) * _INV53

    def uniforms(self, size) -> np.ndarray:
        words = self._raw(int(np.prod(size)) if not np.isscalar(size) else int(size))
        out = (words >> np.uint64(11)) * _INV53
        return out.reshape(size) if not np.isscalar(size) else out

    def integers(self, n: int, size=None):
        """Uniform integers in [0, n).  Bias is O(n / 2^53), negligible here."""
        if size is None:
            return int(self.uniform() * n)
        idx = (self.uniforms(size) * n).astype(np.int64)
        # guard the measure-zero u == 1.0 edge after float rounding
        np.minimum(idx, n - 1, out=idx)
        return idx

    def bernoulli(self, prob: float, size=None):
        if size is None:
            return self.uniform() < prob
        return self.uniforms(size) < prob

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of 0..n-1 via argsort of one uniform block."""
        return np.argsort(self._raw(n), kind="stable").astype(np.int64)
