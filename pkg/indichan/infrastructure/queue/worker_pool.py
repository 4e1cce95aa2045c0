from __future__ import annotations

from typing import Any, Callable, List, Optional, Sequence, TypeVar

import anyio

from indichan.infrastructure.config.config_manager import config_manager
from indichan.infrastructure.utils.logging import bind_logger, get_logger

T = TypeVar("T")

_log = get_logger("queue.worker_pool")


class PoolSettings:
    max_workers = int(config_manager.get("simulation.max_workers", 4) or 1)


async def _run_one(
    fn: Callable[[int], T],
    seed: int,
    limiter: anyio.CapacityLimiter,
    results: List[Any],
    index: int,
    run_id: Optional[str],
) -> None:
    logger = bind_logger(_log, run_id=run_id, seed=seed, op="map_seeds")
    try:
        results[index] = await anyio.to_thread.run_sync(fn, seed, limiter=limiter)
    except Exception:
        logger.exception("seed job failed")
        raise


async def run_seeds(
    fn: Callable[[int], T],
    seeds: Sequence[int],
    max_workers: int,
    run_id: Optional[str] = None,
) -> List[T]:
    """在 anyio 工作线程上并发执行，结果按 seeds 顺序返回（与完成顺序无关）。"""
    limiter = anyio.CapacityLimiter(max_workers)
    results: List[Any] = [None] * len(seeds)
    async with anyio.create_task_group() as tg:
        for index, seed in enumerate(seeds):
            tg.start_soon(_run_one, fn, seed, limiter, results, index, run_id)
    return results


def map_seeds(
    fn: Callable[[int], T],
    seeds: Sequence[int],
    max_workers: Optional[int] = None,
    run_id: Optional[str] = None,
) -> List[T]:
    workers = PoolSettings.max_workers if max_workers is None else int(max_workers)
    if workers <= 1 or len(seeds) <= 1:
        return [fn(seed) for seed in seeds]
    return anyio.run(run_seeds, fn, list(seeds), workers, run_id)
