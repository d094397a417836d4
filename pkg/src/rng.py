"""
Seeded random streams.

Every consumer gets its own PCG64 generator derived from the master seed through
SeedSequence(entropy=seed, spawn_key=key). Keys per chain k:
    (k, 0) fixed-C kernel of the main chain
    (k, 1) training/test split
    (k, 2) reversible-jump proposals and decisions
    (k, 3, C) warm training chain for C subclones
    (k, 4) initialization
Streams are independent of the order in which they are requested, so chains and warm
chains may run in any thread order and still reproduce bit for bit.
"""
from typing import Tuple

import numpy as np

MAIN, SPLIT, RJ, WARM, INIT = 0, 1, 2, 3, 4


def stream(seed: int, *key: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


class ChainStreams:
    """The named streams of one chain."""

    def __init__(self, seed: int, chain: int = 0):
        self.seed = int(seed)
        self.chain = int(chain)

    def _key(self, *rest: int) -> Tuple[int, ...]:
        return (self.chain,) + rest

    def main(self) -> np.random.Generator:
        return stream(self.seed, *self._key(MAIN))

    def split(self) -> np.random.Generator:
        return stream(self.seed, *self._key(SPLIT))

    def rj(self) -> np.random.Generator:
        return stream(self.seed, *self._key(RJ))

    def warm(self, C: int) -> np.random.Generator:
        return stream(self.seed, *self._key(WARM, C))

    def init(self) -> np.random.Generator:
        return stream(self.seed, *self._key(INIT))
