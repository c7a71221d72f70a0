"""SplitMix64 streams, vectorized over numpy uint64.

Output ``i`` (0-based) of a stream seeded with ``s`` is
``mix(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix`` is the
standard SplitMix64 finalizer.  A double in [0, 1) is ``(out >> 11) * 2**-53``.
Child stream ``k`` of a stream is seeded with that stream's output ``k``, so
fields drawn from different children are independent of draw order.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
DEFAULT_SEED = 0x5EED


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int = DEFAULT_SEED):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._pos = 0

    def uint64(self, count: int) -> np.ndarray:
        idx = np.arange(self._pos + 1, self._pos + count + 1, dtype=np.uint64)
        self._pos += count
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + idx * GAMMA)

    def random(self, count: int) -> np.ndarray:
        """Doubles uniform on [0, 1)."""
        return (self.uint64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape)) if shape else 1
        return (low + (high - low) * self.random(count)).reshape(shape)

    def split(self, index: int) -> "SplitMix64":
        parent = SplitMix64(self.seed)
        parent._pos = index
        return SplitMix64(int(parent.uint64(1)[0]))
