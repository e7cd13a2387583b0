"""Seeded, splittable random streams.

Every stochastic component draws from its own PCG64 stream derived from
(master seed, tag path). Tags are hashed with SHA-256, so the derivation is
stable across platforms and Python processes: identical (seed, tags) always
yields the identical sample sequence.

Streams are exclusive-use: hand one stream to one consumer and never share
it across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_entropy(tags: tuple) -> list[int]:
    """Hash a tag path into SeedSequence entropy words."""
    blob = "\x1f".join(str(t) for t in tags).encode("utf-8")
    digest = hashlib.sha256(blob).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)]


def substream(master_seed: int, *tags) -> np.random.Generator:
    """Return an independent generator for (master_seed, *tags).

    The same arguments always produce a generator emitting the identical
    sequence; different tag paths give statistically independent streams.
    """
    entropy = [int(master_seed) & _MASK64] + _tag_entropy(tags)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
