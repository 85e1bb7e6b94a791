"""Deterministic fan-out of independent tasks over worker processes.

Every task owns a pre-derived random stream, so results are identical for
any worker count; only wall time changes.  Failures are captured per key
instead of aborting the batch, and per-task durations are returned for
the speedup report.
"""

import os
import time
import traceback
from dataclasses import dataclass
from multiprocessing import get_context


@dataclass
class TaskFailure:
    """One task that raised: its key, the exception repr, and the trace."""

    key: object
    message: str
    trace: str


def effective_workers(workers):
    """Resolve a worker request: 0 means all cores, and requests are
    capped at the machine's core count."""
    cpu = os.cpu_count() or 1
    if workers < 0:
        raise ValueError("workers must be nonnegative")
    if workers == 0:
        return cpu
    return min(workers, cpu)


def _invoke(item):
    func, key, payload = item
    start = time.perf_counter()
    try:
        value = func(payload)
        outcome = (key, True, value, None)
    except Exception as exc:  # noqa: BLE001 - captured and reported per key
        outcome = (key, False, None, (repr(exc), traceback.format_exc()))
    return (*outcome, time.perf_counter() - start)


def run_tasks(func, tasks, workers=1, chunksize=1):
    """Apply func to every (key, payload) pair, possibly in parallel.

    func must be a module-level callable and payloads picklable when
    workers > 1.  Returns (results, failures, seconds), three dicts keyed
    by task key in task order regardless of scheduling.
    """
    n_workers = effective_workers(workers)
    items = [(func, key, payload) for key, payload in tasks]
    if n_workers == 1 or len(items) <= 1:
        outputs = [_invoke(item) for item in items]
    else:
        with get_context().Pool(processes=n_workers) as pool:
            outputs = pool.map(_invoke, items, chunksize=chunksize)
    results, failures, seconds = {}, {}, {}
    for key, ok, value, error, elapsed in outputs:
        seconds[key] = elapsed
        if ok:
            results[key] = value
        else:
            failures[key] = TaskFailure(key, error[0], error[1])
    return results, failures, seconds
