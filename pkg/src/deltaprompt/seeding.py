"""Deterministic fan-out of one master seed into named substreams.

Every source of randomness in a run (dataset rendering, encoder weights,
parameter init, episode sampling, augmentation draws, profiling) pulls from
its own substream so that changing how one consumer draws never perturbs the
others.  Substreams are derived counter-style: stream ``name`` with extra
counters ``(a, b, ...)`` maps to ``SeedSequence(master, spawn_key=(index, a,
b, ...))``, where ``index`` is the fixed position of ``name`` in `STREAMS`.
numpy guarantees SeedSequence expansion is stable across platforms, which is
what makes byte-identical reruns possible.
"""

from __future__ import annotations

import numpy as np

# Fixed stream registry. Order is part of the on-disk determinism contract:
# never reorder or renumber, only append.
STREAMS = {
    "dataset": 0,
    "encoders": 1,
    "model": 2,
    "episodes": 3,
    "augment": 4,
    "profiling": 5,
    "eval": 6,
}


def seed_sequence(master_seed: int, stream: str, *counters: int) -> np.random.SeedSequence:
    """Return the SeedSequence for a named substream of the master seed."""
    if stream not in STREAMS:
        raise KeyError(f"unknown seed stream {stream!r}; known: {sorted(STREAMS)}")
    key = (STREAMS[stream],) + tuple(int(c) for c in counters)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def generator(master_seed: int, stream: str, *counters: int) -> np.random.Generator:
    """PCG64 generator seeded from the named substream."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, stream, *counters)))


def stream_seed(master_seed: int, stream: str, *counters: int) -> int:
    """A single 63-bit integer seed drawn from the named substream.

    Used where an API wants a plain int seed (e.g. per-image augmentation).
    """
    return int(seed_sequence(master_seed, stream, *counters).generate_state(1, np.uint64)[0] >> 1)
