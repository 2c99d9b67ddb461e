"""Reproducible random number streams.

All stochastic code in this package draws from Philox4x32-10 counter-based
generators keyed through ``numpy.random.SeedSequence``. A stream is fully
determined by a root seed plus a tuple of integer indices (e.g. segment
index and transform id), so datasets and training runs are bit-reproducible
across platforms and regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *indices: int) -> np.random.Generator:
    """Return an independent generator for (seed, *indices).

    Streams with different index tuples are statistically independent;
    the same tuple always yields the same stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))
