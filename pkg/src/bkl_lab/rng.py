"""Counter-based RNG streams.

Streams are numpy Philox generators keyed by (experiment seed, stream index,
purpose). Philox is counter-based, so streams are independent and replayable
without any coordination between workers; merging results is then purely a
matter of summing per-stream statistics in a fixed order.
"""
from __future__ import annotations

import numpy as np

# purpose tags keep streams for different uses of the same (seed, index) apart
PURPOSE = {
    "particles": 1,
    "motion": 2,
    "offspring": 3,
    "estimator": 4,
    "scratch": 5,
}

_INDEX_BITS = 48


def stream(seed: int, index: int = 0, purpose: str = "particles") -> np.random.Generator:
    """Return the Generator for stream (seed, index, purpose).

    index must fit in 48 bits; purpose is one of PURPOSE.
    """
    if not 0 <= index < (1 << _INDEX_BITS):
        raise ValueError(f"stream index out of range: {index}")
    tag = PURPOSE[purpose]
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64((tag << _INDEX_BITS) | index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def substreams(seed: int, count: int, purpose: str = "particles", start: int = 0):
    """Yield (index, Generator) for a contiguous block of streams."""
    for i in range(start, start + count):
        yield i, stream(seed, i, purpose)
