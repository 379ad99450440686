"""Worker pool with static partitions, thread pinning and huge-page allocation.

Numba kernels are compiled with ``nogil=True`` so plain Python threads run
them concurrently.  Each worker is a persistent thread; ``WorkerPool.run``
hands the same callable to every worker and returns once all are done, which
doubles as the barrier between sub-steps.
"""

import logging
import mmap
import os
import queue
import threading

import numpy as np

from .errors import ConfigurationError

log = logging.getLogger(__name__)

MAX_WORKERS_ENV = "LBMBENCH_MAX_WORKERS"


def worker_cap():
    """Worker limit from the environment, or None."""
    raw = os.environ.get(MAX_WORKERS_ENV)
    if not raw:
        return None
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"{MAX_WORKERS_ENV} must be a positive integer, e.g. 4; got {raw!r}")
    if cap < 1:
        raise ConfigurationError(f"{MAX_WORKERS_ENV} must be a positive integer, e.g. 4; got {raw!r}")
    return cap


def effective_workers(requested):
    if requested < 1:
        raise ConfigurationError(f"--threads must be >= 1 (e.g. --threads 4), got {requested}")
    cap = worker_cap()
    return min(requested, cap) if cap else requested


def set_affinity(worker, core):
    """Pin the *calling* thread to ``core``; returns whether it was applied."""
    if not hasattr(os, "sched_setaffinity"):
        return False
    try:
        os.sched_setaffinity(0, {int(core)})
    except (OSError, ValueError) as exc:
        log.warning("could not pin worker %d to core %s: %s", worker, core, exc)
        return False
    return True


class WorkerPool:
    """Fixed set of worker threads; worker ``i`` always owns partition ``i``."""

    def __init__(self, n_workers=1, affinity=None):
        self.n_workers = effective_workers(n_workers)
        self.affinity = list(affinity) if affinity else []
        self.affinity_applied = [False] * self.n_workers
        self._threads = []
        self._queues = []
        self._done = queue.Queue()
        if self.n_workers == 1 and not self.affinity:
            return
        ready = threading.Barrier(self.n_workers + 1)
        for wid in range(self.n_workers):
            q = queue.Queue()
            t = threading.Thread(target=self._loop, args=(wid, q, ready), daemon=True, name=f"lbm-worker-{wid}")
            self._queues.append(q)
            self._threads.append(t)
            t.start()
        ready.wait()

    def _loop(self, wid, q, ready):
        if wid < len(self.affinity):
            self.affinity_applied[wid] = set_affinity(wid, self.affinity[wid])
        ready.wait()
        while True:
            fn = q.get()
            if fn is None:
                return
            try:
                self._done.put((wid, fn(wid), None))
            except BaseException as exc:  # re-raised in the caller
                self._done.put((wid, None, exc))

    @property
    def inline(self):
        return not self._threads

    def run(self, fn):
        """Call ``fn(worker_id)`` on every worker; return results by worker id."""
        if self.inline:
            return [fn(0)]
        for q in self._queues:
            q.put(fn)
        results = [None] * self.n_workers
        error = None
        for _ in range(self.n_workers):
            wid, res, exc = self._done.get()
            results[wid] = res
            if exc is not None and error is None:
                error = exc
        if error is not None:
            raise error
        return results

    def close(self):
        for q in self._queues:
            q.put(None)
        for t in self._threads:
            t.join()
        self._threads, self._queues = [], []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


_INLINE = None


def default_pool():
    global _INLINE
    if _INLINE is None:
        _INLINE = WorkerPool(1)
    return _INLINE


def even_ranges(n, parts):
    """Split ``range(n)`` into ``parts`` contiguous, nearly equal ranges."""
    bounds = [(n * i) // parts for i in range(parts + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(parts)]


def split_weighted(weights, parts):
    """Cut a sequence of items with ``weights`` into ``parts`` contiguous item ranges
    of roughly equal total weight.  Items are never split."""
    weights = np.asarray(weights, dtype=np.int64)
    cum = np.concatenate(([0], np.cumsum(weights)))
    total = cum[-1]
    cuts = [0]
    for i in range(1, parts):
        cuts.append(max(cuts[-1], int(np.searchsorted(cum, total * i / parts))))
    cuts.append(len(weights))
    return [(cuts[i], cuts[i + 1]) for i in range(parts)]


HUGE_PAGE = 2 * 1024 * 1024


def alloc_doubles(n, hugepages=True):
    """Zero-filled float64 buffer from an anonymous mapping, 2 MiB aligned.

    Pages are not touched here, so the first writer places them (first touch).
    Returns ``(array, advised)`` where ``advised`` tells whether
    ``madvise(MADV_HUGEPAGE)`` was accepted.
    """
    n = max(int(n), 1)
    mm = mmap.mmap(-1, n * 8 + HUGE_PAGE)
    advised = False
    if hugepages and hasattr(mmap, "MADV_HUGEPAGE"):
        try:
            mm.madvise(mmap.MADV_HUGEPAGE)
            advised = True
        except OSError:
            advised = False
    addr = np.frombuffer(mm, dtype=np.uint8, count=1).ctypes.data
    shift = (-addr) % HUGE_PAGE
    arr = np.frombuffer(mm, dtype=np.float64, count=n, offset=shift)
    return arr, advised
