"""Deterministic chunked parallel map over spectral modes."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

ENV_THREADS = "HILFER_MILD_THREADS"
# chunk boundaries never depend on the thread count, so results are bitwise stable
MODE_CHUNK = 8

log = logging.getLogger(__name__)
T = TypeVar("T")


def thread_count() -> int:
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        n = int(raw)
    except ValueError:
        log.warning("ignoring non-integer %s=%r", ENV_THREADS, raw)
        return 1
    return max(n, 1)


def chunks(n: int, size: int = MODE_CHUNK) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def map_ordered(fn: Callable[[slice], T], parts: Sequence[slice]) -> list[T]:
    """Apply ``fn`` to every part; results come back in input order."""
    n = thread_count()
    if n == 1 or len(parts) <= 1:
        return [fn(p) for p in parts]
    with ThreadPoolExecutor(max_workers=min(n, len(parts))) as pool:
        return list(pool.map(fn, parts))
