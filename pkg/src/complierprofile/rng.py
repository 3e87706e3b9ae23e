"""Reproducible random substreams.

All randomness goes through Philox-4x64, a counter-based generator. A run
seed is hashed into a Philox key by ``SeedSequence``; independent substreams
are addressed by a tuple of non-negative integers (e.g. ``(size, replication)``
or a bootstrap replicate index). Because a substream depends only on its
address, results do not depend on how work is split across workers.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "numpy.random.Philox (4x64, counter-based); key from SeedSequence(seed, spawn_key=address)"


def substream(seed: int, *address: int) -> np.random.Generator:
    """Return the generator for ``address`` under run ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(a) for a in address))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *address: int) -> int:
    """A 63-bit integer seed for a nested computation at ``address``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(a) for a in address))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


class ReplicateStreams:
    """Cheap per-index substreams sharing one key.

    Replicate ``r`` gets a Philox generator whose counter starts at
    ``r * 2**192``, so streams never overlap for any realistic draw count.
    Creating a stream costs one Philox construction, not a SeedSequence hash.
    """

    def __init__(self, seed: int) -> None:
        self._key = np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)

    def __call__(self, index: int) -> np.random.Generator:
        if index < 0:
            raise ValueError("replicate index must be non-negative")
        bitgen = np.random.Philox(key=self._key, counter=[0, 0, 0, int(index)])
        return np.random.Generator(bitgen)
