"""Seeded random streams and order-preserving parallel maps.

Monte Carlo work is split into fixed-size chunks; chunk ``i`` always draws from
child stream ``i`` of the caller's generator, so results do not depend on how
many worker threads execute the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK = 4096
_threads: int | None = None


def set_threads(n: int | None) -> None:
    """Cap worker threads for all parallel maps (``None`` means all cores)."""
    global _threads
    _threads = None if n is None else max(1, int(n))


def threads() -> int:
    return _threads or os.cpu_count() or 1


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def pmap(fn: Callable[..., T], *iterables: Sequence) -> list[T]:
    n = threads()
    if n == 1:
        return [fn(*args) for args in zip(*iterables)]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, *iterables))


def map_chunks(fn: Callable[[int, np.random.Generator], T], total: int,
               rng: np.random.Generator, chunk: int = CHUNK) -> list[T]:
    """Call ``fn(size, child_rng)`` once per chunk, in chunk order."""
    sizes = chunk_sizes(total, chunk)
    children = rng.spawn(len(sizes))
    return pmap(fn, sizes, children)
