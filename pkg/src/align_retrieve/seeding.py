"""Named random streams derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np


def stream_seed(seed: int, name: str) -> list[int]:
    return [int(seed), zlib.crc32(name.encode("utf-8"))]


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator for subsystem ``name`` (e.g. "init", "dataset", "sampler")."""
    return np.random.default_rng(stream_seed(seed, name))
