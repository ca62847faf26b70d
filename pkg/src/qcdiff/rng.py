"""Deterministic splitting of one master seed into named substreams.

Every source of randomness in a run (weight init, batch shuffling, diffusion
noise, ancestral sampling, metric subsampling, frozen extractor weights) pulls
from its own ``numpy`` generator derived as::

    SeedSequence([master_seed, STREAM_ID, crc32(key)?])

so adding draws to one stream never perturbs another, and the classical and
quantum model variants see identical batch order and noise under a shared
master seed. Per-parameter init uses the parameter name as ``key``, which
makes layers that exist in both variants initialize identically.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = {
    "init": 0,
    "batch": 1,
    "noise": 2,
    "sample": 3,
    "metrics": 4,
    "extractor": 5,
}


def stream_rng(master_seed: int, stream: str, key: str | None = None) -> np.random.Generator:
    """Return the generator for one named substream of ``master_seed``."""
    if stream not in STREAMS:
        raise KeyError(f"unknown rng stream {stream!r}; expected one of {sorted(STREAMS)}")
    entropy = [int(master_seed), STREAMS[stream]]
    if key is not None:
        entropy.append(zlib.crc32(key.encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))
