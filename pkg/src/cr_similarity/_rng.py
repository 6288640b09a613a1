"""Keyed random substreams.

A stream is fully determined by ``(seed, *key)``, so work can be split across
workers in any order and still reproduce the serial result.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit integer seed for the child stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))
