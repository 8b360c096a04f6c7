"""Seeded, splittable random streams.

Each fit owns one :class:`RngStream`.  Draws for different purposes (label
simulation, parameter draws, simulation kernels) come from independent
substreams, and the substream for a given (purpose, iteration) pair is a pure
function of the seed.  Replaying a seed therefore reproduces every draw, and
a chain can be restarted from any iteration without replaying its history.
"""

from __future__ import annotations

import numpy as np

LABELS = 0
PARAMS = 1
KERNEL = 2
INIT = 3

_PURPOSES = (LABELS, PARAMS, KERNEL, INIT)


class RngStream:
    """PCG64 generator family keyed by (seed, purpose, iteration)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.counter = 0

    def generator(self, purpose: int, iteration: int = 0) -> np.random.Generator:
        if purpose not in _PURPOSES:
            raise ValueError(f"unknown substream purpose {purpose}")
        seq = np.random.SeedSequence(self.seed, spawn_key=(purpose, iteration))
        self.counter += 1
        return np.random.Generator(np.random.PCG64(seq))

    def labels(self, iteration: int) -> np.random.Generator:
        return self.generator(LABELS, iteration)

    def params(self, iteration: int) -> np.random.Generator:
        return self.generator(PARAMS, iteration)

    def kernel(self, iteration: int) -> np.random.Generator:
        return self.generator(KERNEL, iteration)
