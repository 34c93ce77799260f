"""Reproducible random sub-streams.

Samples are grouped into fixed-size blocks; block ``b`` of a run seeded with
``seed`` always draws from ``SeedSequence(seed, spawn_key=(tag, b))``.  The value
of sample ``i`` therefore depends only on ``(seed, i)`` and never on how many
workers split the blocks between them.
"""

from __future__ import annotations

import secrets
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

BLOCK_SIZE = 8192

R = TypeVar("R")


def fresh_seed() -> int:
    return secrets.randbits(63)


def block_rng(seed: int, block: int, tag: int = 0) -> np.random.Generator:
    """Generator for one sample block.  ``tag`` separates independent uses."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(n: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(n), block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[..., R],
    n: int,
    seed: int,
    workers: int = 1,
    tag: int = 0,
    block_size: int = BLOCK_SIZE,
    args: Sequence = (),
) -> list[R]:
    """Run ``fn(rng, size, *args)`` on every block, returning results in block order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    sizes = block_sizes(n, block_size)
    jobs = [(seed, b, tag, size) for b, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_block(fn, job, args) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_block, fn, job, args) for job in jobs]
        return [f.result() for f in futures]


def _run_block(fn, job, args):
    seed, b, tag, size = job
    return fn(block_rng(seed, b, tag), size, *args)
