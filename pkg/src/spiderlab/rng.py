"""Counter-based random number streams for reproducible parallel Monte Carlo.

Each trajectory owns a stream keyed by ``(seed, index)``.  Streams are backed
by the Philox counter-based generator, so distinct keys yield statistically
independent sequences and the same key always reproduces bit-identical draws,
independent of scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream"]

_U64 = np.uint64


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by a (seed, index) pair."""

    seed: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if not 0 <= int(self.index) < 2**64:
            raise ValueError(f"index must fit in 64 bits, got {self.index}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.index], dtype=_U64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Stream for trajectory ``index`` under the same seed."""
        return RngStream(self.seed, index)
