"""
Ordered worker pool for Monte Carlo chunks.

Trials are split into fixed-size chunks and every chunk owns an RNG stream
spawned from the run seed, so the combined result depends on the seed only
and not on how many threads executed the chunks.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Sequence

import numpy as np

from experiments.exceptions import ParameterError
from experiments.services.config import get_config


logger = logging.getLogger(__name__)


def chunk_sizes(total: int, chunk_size: int | None = None) -> List[int]:
    """
    Split a trial count into chunk sizes.

    Args:
        total: Number of trials
        chunk_size: Trials per chunk (defaults to UPLOADLAB['CHUNK_SIZE'])

    Returns:
        List of chunk sizes summing to total
    """
    if total < 0:
        raise ParameterError(f'trial count must be nonnegative, got {total}')
    if chunk_size is None:
        chunk_size = get_config()['CHUNK_SIZE']
    full, rest = divmod(int(total), int(chunk_size))
    sizes = [int(chunk_size)] * full
    if rest:
        sizes.append(rest)
    return sizes


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators, one per chunk, derived from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.default_rng(child) for child in children]


def map_ordered(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    """
    Apply fn to every item on a thread pool and return results in input order.

    Any exception raised by a task propagates after the pool shuts down.
    """
    items = list(items)
    if not items:
        return []
    if threads is None:
        threads = get_config()['DEFAULT_THREADS']
    threads = max(1, min(int(threads), len(items)))

    started = time.perf_counter()
    if threads == 1:
        results = [fn(item) for item in items]
    else:
        ordered_results: list = [None] * len(items)
        with ThreadPoolExecutor(max_workers=threads) as executor:
            future_to_index = {executor.submit(fn, item): idx for idx, item in enumerate(items)}
            for future in as_completed(future_to_index):
                idx = future_to_index[future]
                ordered_results[idx] = future.result()
        results = ordered_results

    logger.debug(
        'Worker pool finished. tasks=%s threads=%s elapsed=%.3fs',
        len(items), threads, time.perf_counter() - started,
    )
    return results


def run_chunked(fn: Callable, total: int, seed: int, threads: int | None = None, chunk_size: int | None = None) -> list:
    """
    Run fn(size, rng) for every chunk and return the ordered chunk results.
    """
    sizes = chunk_sizes(total, chunk_size)
    generators = spawn_generators(seed, len(sizes))
    return map_ordered(lambda pair: fn(pair[0], pair[1]), list(zip(sizes, generators)), threads)
