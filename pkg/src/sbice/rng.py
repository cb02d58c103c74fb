"""Deterministic counter-based random substreams.

Every stochastic operation in the engine receives a :class:`RandomStream`,
an immutable (master_seed, stream_id) pair. A fresh numpy generator is
instantiated per use, so the same stream always replays the same draws and
distinct stream ids never share state. Substreams are derived by mixing an
index path (e.g. generation, particle slot) into the id, which makes
parallel and serial execution produce identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(z: int) -> int:
    """One splitmix64 mixing step; full-period permutation of 64-bit ints."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RandomStream:
    """Immutable handle on one reproducible random substream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def substream(self, *indices: int) -> "RandomStream":
        """Derive the child stream keyed by an index path.

        Deriving with the same path always yields the same stream; distinct
        paths yield streams that are independent for all practical purposes.
        """
        sid = self.stream_id
        for idx in indices:
            sid = _splitmix64(sid ^ _splitmix64(int(idx) & _MASK64))
        return RandomStream(self.master_seed, sid)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (self.stream_id << 64) | self.master_seed
        return np.random.Generator(np.random.Philox(key=key))
