"""Seeded, counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *path)``.  Trials never
share a generator, so results do not depend on the order or the thread in
which trials are executed.
"""
from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1

# stable integer labels for the sub-streams of one trial
STREAMS = {
    "matrix": 1,
    "noise": 2,
    "goe": 3,
    "diag": 4,
    "scalar": 5,
    "index": 6,
    "path": 7,
    "spectral": 8,
    "reference": 9,
    "trial": 10,
    "flow": 11,
    "hat": 12,
    "split": 13,
}


def _word(x) -> int:
    if isinstance(x, str):
        return STREAMS[x]
    return int(x) & SEED_MASK


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for ``seed`` and a path of integer/str labels."""
    words = [_word(seed)] + [_word(p) for p in path]
    ss = np.random.SeedSequence(words)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path) -> int:
    """A 64-bit child seed, used where an API takes a plain integer seed."""
    words = [_word(seed)] + [_word(p) for p in path]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])
