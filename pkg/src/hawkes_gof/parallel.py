"""Ordered process-pool map used by the bootstrap and the Monte Carlo harness."""
import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "HAWKES_GOF_WORKERS"


def resolve_workers(workers=None) -> int:
    """Explicit value, else ``$HAWKES_GOF_WORKERS``, else the CPU count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        workers = int(env) if env else (os.cpu_count() or 1)
    workers = int(workers)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def pmap(func, jobs, workers=1):
    """``[func(j) for j in jobs]``, optionally fanned out over processes.

    Output order always matches input order, so results never depend on
    scheduling.
    """
    jobs = list(jobs)
    workers = resolve_workers(workers)
    if workers == 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    chunksize = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(func, jobs, chunksize=chunksize))
