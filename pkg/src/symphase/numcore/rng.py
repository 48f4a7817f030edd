"""Seeded, splittable random streams.

Every run derives all of its randomness from one root seed. Named substreams
(environment, augmentation, planner, init, ...) are independent Philox
counter-based generators keyed by ``blake2b(root_seed || label)``, so the
same (seed, label) pair reproduces the same stream on any platform and new
consumers of randomness never perturb existing streams.
"""

import hashlib

import numpy as np


def _derive_key(seed: int, label: str) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for (seed, label), reproducible across runs."""
    return np.random.Generator(np.random.Philox(key=_derive_key(seed, label)))


class RngState:
    """A root seed plus a factory for labelled substreams.

    ``split(label)`` always returns a fresh generator at its initial counter,
    so splitting is idempotent: two splits with one label yield identical
    streams. Sequential draws should keep and reuse the returned generator.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def split(self, label: str) -> np.random.Generator:
        return stream(self.seed, label)

    def __repr__(self):
        return f"RngState(seed={self.seed})"
