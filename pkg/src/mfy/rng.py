"""Counter-based splittable random streams.

Every stream is a Philox generator keyed by (seed, *stream_key).  Philox is
counter-based, so particle i's noise depends only on (seed, i) and streams can
be drawn in any order, in parallel, with bit-identical results.
"""

from __future__ import annotations

import numpy as np

# Fixed tags keep independent subsystems on disjoint streams for one seed.
STREAM_Z = 0
STREAM_REFERENCE = 1
STREAM_PARTICLES = 2
STREAM_METRICS = 3
STREAM_STUDY = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``.

    Deterministic: the same (seed, key) always yields the same generator
    state, independent of any other stream having been used.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
