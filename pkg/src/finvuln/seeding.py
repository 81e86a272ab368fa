"""Named random substreams derived from one master seed.

Every stage draws from ``substream(master, "stage", ...)`` so adding or
reordering stages never shifts another stage's randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_entropy(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


def substream(master_seed: int, *tags: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed)] + [_tag_entropy(t) for t in tags])


def generator(master_seed: int, *tags: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(substream(master_seed, *tags)))


def derive_int(master_seed: int, *tags: str) -> int:
    """A derived 63-bit integer seed for APIs that take plain ints."""
    return int(substream(master_seed, *tags).generate_state(1, np.uint64)[0] >> 1)
