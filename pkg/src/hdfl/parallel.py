"""Order-preserving map over worker processes.

Tasks carry their own seeds, so results never depend on scheduling; callers
aggregate the returned list in task order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, tasks, workers: int = 1) -> list:
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
