"""Counter-based random streams.

Every simulated path draws from its own Philox stream addressed by
(master seed, stream index), so batches can be generated in any order or
chunking and still reproduce bit for bit.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, index) pair.

    The index is placed in the third word of the 256-bit Philox counter,
    giving each stream 2^128 private draws.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    if index < 0:
        raise ValueError("stream index must be >= 0")
    bitgen = np.random.Philox(key=np.uint64(seed), counter=[0, 0, int(index), 0])
    return np.random.Generator(bitgen)


def substream_normals(seed: int, offset: int, n_paths: int, shape: tuple) -> np.ndarray:
    """Standard normals for paths offset..offset+n_paths-1, stacked on axis 0.

    Drawing per-path streams and stacking keeps results independent of how a
    batch is chunked across workers.
    """
    out = np.empty((n_paths, *shape))
    for i in range(n_paths):
        out[i] = stream(seed, offset + i).standard_normal(shape)
    return out
