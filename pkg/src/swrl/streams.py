"""Deterministic random-stream derivation and reproducible Monte Carlo maps.

Every Monte Carlo trial in this package draws from a stream derived from
(master seed, context tag, trial index). Results are therefore bit-identical
across reruns and across worker counts: workers split the trial range, but
each trial's stream depends only on its index, and partial results are
reduced in fixed trial order.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["derive_rng", "resolve_workers", "mc_collect"]

# trials per work unit; fixed so chunking never affects which stream a trial sees
_CHUNK = 64


def _as_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream path parts must be nonnegative integers")
        return int(part)
    raise TypeError(f"unsupported stream path part: {part!r}")


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Generator for the stream addressed by (seed, *path).

    Path parts are nonnegative ints or short strings (hashed to ints).
    Same (seed, path) always yields the same stream; distinct paths yield
    independent streams.
    """
    key = tuple(_as_word(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else SWRL_THREADS, else 1."""
    if workers is None:
        env = os.environ.get("SWRL_THREADS", "").strip()
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def mc_collect(trials: int, worker, workers: int | None = None) -> list:
    """Evaluate worker(trial_index) for each trial, in index order.

    The worker must derive all of its randomness from the trial index (via
    `derive_rng`), so the output is independent of the worker count. Results
    are returned as a list ordered by trial index.
    """
    nworkers = resolve_workers(workers)
    if nworkers == 1 or trials <= _CHUNK:
        return [worker(i) for i in range(trials)]

    starts = range(0, trials, _CHUNK)

    def run_chunk(lo):
        return [worker(i) for i in range(lo, min(lo + _CHUNK, trials))]

    out: list = []
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        for chunk in pool.map(run_chunk, starts):
            out.extend(chunk)
    return out
