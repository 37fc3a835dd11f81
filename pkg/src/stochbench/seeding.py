"""Named random substreams derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def substream_seed(seed: int, *keys) -> np.random.SeedSequence:
    """Seed sequence for ``(seed, *keys)``; strings are hashed with CRC32."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))


def substream(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(substream_seed(seed, *keys))


def derived_int(seed: int, *keys) -> int:
    """A 63-bit integer seed for a substream, for recording in output files."""
    return int(substream_seed(seed, *keys).generate_state(1, np.uint64)[0] >> np.uint64(1))
