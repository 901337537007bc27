"""Keyed task pool and counter-based random generators."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Hashable, Iterable, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def task_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator keyed by (seed, *key); independent of scheduling."""
    entropy = [int(seed)] + [int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def run_keyed(
    fn: Callable[[Any], Any],
    keys: Iterable[Hashable],
    threads: int = 1,
    return_exceptions: bool = False,
) -> List[Tuple[Hashable, Any]]:
    """Run ``fn(key)`` for every key and return ``(key, result)`` sorted by key.

    With ``return_exceptions`` a failing task yields its exception object as
    the result instead of aborting the whole batch.
    """
    keys = list(keys)

    def call(key):
        try:
            return fn(key)
        except Exception as e:  # noqa: BLE001
            if not return_exceptions:
                raise
            logger.warning("task %r failed: %s", key, e)
            return e

    if threads <= 1 or len(keys) <= 1:
        results = [call(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(call, keys))
    return sorted(zip(keys, results), key=lambda kv: kv[0])


def blocks(count: int, size: int) -> List[slice]:
    """Contiguous slices covering ``range(count)``."""
    return [slice(s, min(s + size, count)) for s in range(0, count, size)]


def map_blocks(fn: Callable[[slice], Any], count: int, size: int, threads: int = 1) -> Sequence[Any]:
    """Apply ``fn`` to disjoint index blocks; results come back in block order."""
    spans = blocks(count, size)
    out = run_keyed(lambda i: fn(spans[i]), range(len(spans)), threads)
    return [r for _, r in out]
