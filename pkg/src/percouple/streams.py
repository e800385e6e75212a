"""Reproducible random streams.

A UniformField attaches one uniform to every (seed, replica, site-index)
triple through a counter-based hash, so any worker can evaluate any site of
any replica without coordination and every run is bit-reproducible
regardless of thread count. ``substream`` derives an auxiliary numpy
generator (Philox, also counter-based) for Monte-Carlo components that want
a conventional generator.
"""

from __future__ import annotations

import numpy as np

from ._kernels import py_uniform_at, uniform_block


class UniformField:
    """Lazily evaluated iid uniforms indexed by canonical site index."""

    __slots__ = ("seed", "replica", "_cache")

    def __init__(self, seed, replica=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.replica = int(replica) & 0xFFFFFFFFFFFFFFFF
        self._cache = {}

    def u(self, idx):
        """The uniform attached to site index ``idx``."""
        v = self._cache.get(idx)
        if v is None:
            v = py_uniform_at(self.seed, self.replica, idx)
            self._cache[idx] = v
        return v

    def block(self, n):
        """Uniforms for indices 0..n-1 as one vector."""
        return uniform_block(self.seed, self.replica, n)

    def __repr__(self):
        return f"UniformField(seed={self.seed}, replica={self.replica})"


def substream(seed, *ids):
    """A numpy Generator keyed by (seed, ids...): deterministic, disjoint."""
    counter = list(ids[:3]) + [0] * (3 - len(ids[:3]))
    return np.random.Generator(
        np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF, counter=counter + [0])
    )
