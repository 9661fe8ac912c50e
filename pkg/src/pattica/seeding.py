"""Deterministic named sub-streams derived from a single pipeline seed.

Every random decision in the pipeline draws from a generator created here, so
stages can be re-run in isolation and still reproduce the full-pipeline bytes.
Stream names are mapped to fixed integers; changing this table changes every
seeded artifact, so entries are append-only.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "screening": 1,
    "cca": 2,
    "shap-bg": 3,
    "synth": 4,
    "render": 5,
    "trees": 6,
}


def substream(seed: int, name: str, *key: int) -> np.random.Generator:
    """Generator for stream `name` refined by integer sub-keys (fold, restart, ...)."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), STREAMS[name], *map(int, key))))


def subseed(seed: int, name: str, *key: int) -> int:
    """A plain integer seed derived from the same keyed stream."""
    ss = np.random.SeedSequence((int(seed), STREAMS[name], *map(int, key)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
