"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by ``(seed, index, path, subkeys)``,
so a replication's draws depend only on its key and never on scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.index < 0:
            raise ValueError("stream index must be non-negative")

    def generator(self, *subkeys: int) -> np.random.Generator:
        # the 0 sentinel keeps generator keys disjoint from child paths
        key = (int(self.index), *self.path, 0, *(int(s) for s in subkeys))
        seq = np.random.SeedSequence(int(self.seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.index, self.path + (1, int(index)))

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "index": int(self.index), "path": list(self.path)}
