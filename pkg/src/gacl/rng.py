"""Named random streams derived from one master seed.

Every stochastic call site asks for a stream by name, so adding a draw in one
place never shifts the sequence seen by another.  Streams are counter-based
(Philox) generators keyed by a hash of ``(master_seed, *names)``.
"""
from __future__ import annotations

import hashlib

import numpy as np


def stream(master_seed: int, *names) -> np.random.Generator:
    """A fresh generator for ``names`` under ``master_seed``."""
    key = repr((int(master_seed),) + tuple(names)).encode()
    entropy = int.from_bytes(hashlib.blake2b(key, digest_size=16).digest(), "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


class Streams:
    """Persistent named streams; ``get`` returns the same generator on every call."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._live: dict[tuple, np.random.Generator] = {}

    def get(self, *names) -> np.random.Generator:
        if names not in self._live:
            self._live[names] = stream(self.master_seed, *names)
        return self._live[names]

    def fresh(self, *names) -> np.random.Generator:
        return stream(self.master_seed, *names)
