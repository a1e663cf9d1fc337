"""Replicated chi-square statistics under a fixed mean vector.

Replications are cut into blocks of ``BLOCK`` rows; block ``i`` draws its
Gaussians from the stream ``(seed, i)``. Blocks are independent, so the output
is the same for any number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .rng import check_seed, generator

__all__ = ["BLOCK", "default_workers", "simulate_statistics"]

BLOCK = 4096


def default_workers() -> int:
    env = os.environ.get("MAXIDETECT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _block(seed, index, size, means, eps, weights):
    z = generator(seed, index).standard_normal((size, len(means)))
    return _kernels.chi2_statistics(z, means, eps, weights)


def simulate_statistics(means, eps: float, weights, n: int, seed: int, workers: int | None = None) -> np.ndarray:
    """Simulate ``n`` replications of several weighted chi-square statistics.

    Parameters
    ----------
    means : array of shape (D,)
        b_k * theta_k for k = 1..D.
    eps : float
        Noise level.
    weights : array of shape (m, D)
        One row of weights per statistic; ``b**-2`` gives the inverse
        statistic, ones the direct one.
    n : int
        Number of replications.

    Returns
    -------
    array of shape (n, m)
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one replication")
    seed = check_seed(seed)
    means = np.ascontiguousarray(means, dtype=np.float64)
    weights = np.atleast_2d(np.ascontiguousarray(weights, dtype=np.float64))
    if weights.shape[1] != len(means):
        raise ValueError("weights and means disagree on D")
    workers = default_workers() if workers is None else max(1, int(workers))
    sizes = [min(BLOCK, n - start) for start in range(0, n, BLOCK)]
    out = np.empty((n, weights.shape[0]))

    def run(i):
        out[i * BLOCK : i * BLOCK + sizes[i]] = _block(seed, i, sizes[i], means, eps, weights)

    if workers == 1 or len(sizes) == 1:
        for i in range(len(sizes)):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(len(sizes))))
    return out
