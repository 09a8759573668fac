"""Counter-based random streams and a chunked, worker-count-independent map.

Every Monte Carlo batch is cut into fixed-size chunks. Chunk ``i`` of an
operation tagged ``tag`` always draws from the Philox stream keyed by
``(seed, tag, i)``, so results depend on the master seed only and never on how
many workers process the chunks.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK_SIZE = 8192
WORKERS_ENV = "LORDENKIT_WORKERS"


def _tag(tag):
    if isinstance(tag, str):
        return zlib.crc32(tag.encode())
    return int(tag)


def stream(seed, *key) -> np.random.Generator:
    """Independent Philox generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(_tag(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return stream(rng)


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def map_chunks(fn, n, seed, tag, workers=None, chunk_size=CHUNK_SIZE):
    """Apply ``fn(rng, size)`` to consecutive chunks of ``n`` items; results in chunk order."""
    if n < 1:
        raise ValueError("need at least one item")
    workers = default_workers() if workers is None else max(1, int(workers))
    sizes = [min(chunk_size, n - start) for start in range(0, n, chunk_size)]
    jobs = [(stream(seed, tag, i), size) for i, size in enumerate(sizes)]
    if workers == 1 or len(jobs) == 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
