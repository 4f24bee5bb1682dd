"""Seed handling and the fixed chunk schedule shared by all Monte Carlo loops.

Every estimator splits its sample budget into chunks of ``CHUNK`` draws and
gives chunk ``k`` the ``k``-th child of one :class:`numpy.random.SeedSequence`.
Results are recombined in chunk order, so they depend only on the seed and
the sample count, never on how many workers ran the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar, Union

import numpy as np

CHUNK = 20_000

RandomLike = Union[None, int, np.random.SeedSequence, np.random.Generator]

T = TypeVar("T")


def as_seed_sequence(rng: RandomLike) -> np.random.SeedSequence:
    """Coerce an int seed, a SeedSequence or a Generator into a SeedSequence.

    A Generator is advanced by one draw, so repeated calls with the same
    generator yield distinct (but reproducible) streams.
    """
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    if rng is None:
        return np.random.SeedSequence()
    if isinstance(rng, (int, np.integer)) and rng >= 0:
        return np.random.SeedSequence(int(rng))
    raise TypeError(f"cannot build a random stream from {rng!r}")


def as_generator(rng: RandomLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(as_seed_sequence(rng))


def child_sequences(base: np.random.SeedSequence, count: int) -> list[np.random.SeedSequence]:
    """The first ``count`` children of ``base``, without advancing its spawn counter.

    Passing the same SeedSequence to two estimators therefore replays the same
    draws (common random numbers).
    """
    return [
        np.random.SeedSequence(base.entropy, spawn_key=base.spawn_key + (k,), pool_size=base.pool_size)
        for k in range(count)
    ]


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(int(total), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[int, np.random.Generator], T],
    total: int,
    rng: RandomLike,
    workers: int = 1,
    chunk: int = CHUNK,
) -> list[T]:
    """Run ``fn(size, generator)`` over the chunk schedule; results in chunk order."""
    sizes = chunk_sizes(total, chunk)
    children = child_sequences(as_seed_sequence(rng), len(sizes))
    gens = [np.random.default_rng(c) for c in children]
    if workers <= 1 or len(sizes) <= 1:
        return [fn(s, g) for s, g in zip(sizes, gens)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, sizes, gens))


def mean_and_stderr(parts: Sequence[np.ndarray]) -> tuple[float, float, int]:
    x = np.concatenate([np.ravel(p) for p in parts])
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se, n
