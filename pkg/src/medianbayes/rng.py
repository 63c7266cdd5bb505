"""Counter-based seeding.

Every stochastic piece of work gets its own generator derived from a master seed and
a tuple of integer keys, so results never depend on the order in which work is run.
"""

from __future__ import annotations

import hashlib
from typing import List, Optional, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def key_of(text: str) -> int:
    """Stable 63-bit integer for a text key (Python's hash() is salted per process)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Root sequence for ``seed``.

    A Generator is read through its current state and advanced, so reusing one
    Generator across calls yields fresh streams while equal fresh generators agree.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(seed.integers(0, 2**63 - 1, size=4, dtype=np.int64).tolist())
    return np.random.SeedSequence(seed)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))


def substream(seed: SeedLike, *keys: int) -> np.random.Generator:
    """Generator for the child of ``seed`` addressed by ``keys``."""
    return np.random.default_rng(child_seed(seed, *keys))


def substreams(seed: SeedLike, count: int, *prefix: int) -> List[np.random.Generator]:
    return [substream(seed, *prefix, index) for index in range(count)]


def child_seed(seed: SeedLike, *keys: int) -> np.random.SeedSequence:
    root = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=root.entropy,
        spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in keys),
        pool_size=root.pool_size,
    )


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy % (2**63))


__all__ = [
    "SeedLike",
    "as_generator",
    "as_seed_sequence",
    "child_seed",
    "key_of",
    "resolve_seed",
    "substream",
    "substreams",
]
