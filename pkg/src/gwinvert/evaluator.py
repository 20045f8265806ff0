"""Forward-model evaluation with optional process parallelism.

Ensemble methods evaluate hundreds of independent parameter vectors at a
time, so batches are farmed out to a process pool; the model object is
shipped to each worker once (pool initializer) rather than per task.  The
evaluator also counts every forward call, which the drivers use for their
evaluation accounting.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

_WORKER_MODEL = None


def _worker_init(model):
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _worker_call(m):
    return _WORKER_MODEL(m)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return max(1, os.cpu_count() or 1)
    if workers < 1:
        raise ValueError("workers must be at least 1")
    return int(workers)


class ForwardEvaluator:
    """Wraps a forward model; maps parameter matrices to output matrices.

    The model must be picklable when ``workers > 1``.  Results are returned
    in input order regardless of worker scheduling, so runs stay
    deterministic.
    """

    def __init__(self, model, workers: int | None = 1):
        self.model = model
        self.workers = resolve_workers(workers)
        self.calls = 0
        self._pool = None

    def _ensure_pool(self):
        if self._pool is None:
            self._pool = ProcessPoolExecutor(
                max_workers=self.workers, initializer=_worker_init, initargs=(self.model,)
            )
        return self._pool

    def evaluate_one(self, m: np.ndarray) -> np.ndarray:
        self.calls += 1
        return np.asarray(self.model(np.asarray(m, dtype=float)), dtype=float)

    def evaluate_matrix(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        columns = [params[:, j] for j in range(params.shape[1])]
        self.calls += len(columns)
        if self.workers > 1 and len(columns) > 1:
            pool = self._ensure_pool()
            chunk = max(1, len(columns) // (4 * self.workers))
            results = list(pool.map(_worker_call, columns, chunksize=chunk))
        else:
            results = [self.model(c) for c in columns]
        return np.column_stack([np.asarray(r, dtype=float) for r in results])

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
