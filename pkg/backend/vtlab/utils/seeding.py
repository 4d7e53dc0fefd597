"""
Seeded random streams and sharded execution.

Every random draw in the package comes from a generator keyed by an integer tuple
(seed, stream, index). Sharded work uses a fixed shard size, so the shard layout, and
with it every draw, does not depend on how many workers execute the shards.
"""
from typing import Callable, List, Sequence, TypeVar

import numpy as np
from joblib import Parallel, delayed

from ..core.logging_config import LogCategory, get_logger

logger = get_logger(__name__, LogCategory.ROLLOUT)

T = TypeVar("T")

SHARD_SIZE = 2048

# stream ids
STREAM_ROLLOUT = 11
STREAM_CUSTOMERS = 12
STREAM_PRICES = 13
STREAM_TRAINING = 21
STREAM_EVALUATION = 31
STREAM_DRIFT = 41


def make_rng(*key: int) -> np.random.Generator:
    """Generator for the integer key; equal keys give identical streams."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def shard_sizes(count: int, shard_size: int = SHARD_SIZE) -> List[int]:
    """Split ``count`` items into full shards plus one remainder shard."""
    if count <= 0:
        return []
    full, rest = divmod(count, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def run_sharded(
    work: Callable[[int, np.random.Generator], T],
    count: int,
    seed: int,
    stream: int,
    threads: int = 1,
    shard_size: int = SHARD_SIZE,
) -> List[T]:
    """
    Run ``work(n, rng)`` once per shard and return the results in shard order.

    Shard k draws from ``make_rng(seed, stream, k)``. With ``threads > 1`` the shards run in
    joblib worker processes; the merged output is identical to the serial run.
    """
    sizes = shard_sizes(count, shard_size)
    if threads <= 1 or len(sizes) <= 1:
        return [work(n, make_rng(seed, stream, k)) for k, n in enumerate(sizes)]
    logger.debug(f"running {len(sizes)} shards on {threads} workers", operation="run_sharded")
    return Parallel(n_jobs=threads)(
        delayed(work)(n, make_rng(seed, stream, k)) for k, n in enumerate(sizes)
    )


def derive_seeds(seed: int, count: int, stream: int = STREAM_TRAINING) -> Sequence[int]:
    """Independent integer seeds for ``count`` sub-runs."""
    return [int(s) for s in make_rng(seed, stream).integers(0, 2**31 - 1, size=count)]
