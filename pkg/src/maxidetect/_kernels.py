"""Hot loops of the Monte Carlo engine.

Each kernel has a numba version and a pure-numpy version with identical
semantics. Numba is used when importable unless ``MAXIDETECT_NO_NUMBA`` is
set to a non-empty value other than ``0``; the choice is made once at import.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "chi2_statistics", "chi2_statistics_numpy", "chi2_statistics_numba"]


def _numba_disabled() -> bool:
    return os.environ.get("MAXIDETECT_NO_NUMBA", "") not in ("", "0")


def chi2_statistics_numpy(z, means, eps, weights):
    """out[i, j] = sum_k weights[j, k] * ((means[k] + eps*z[i, k])**2 - eps**2)."""
    y = means + eps * z
    q = y * y - eps * eps
    return q @ weights.T


try:
    if _numba_disabled():
        raise ImportError("numba disabled by MAXIDETECT_NO_NUMBA")
    from numba import njit
except ImportError:
    njit = None


if njit is not None:

    @njit(cache=True, nogil=True)
    def _chi2_jit(z, means, eps, weights, out):
        n, D = z.shape
        m = weights.shape[0]
        e2 = eps * eps
        for i in range(n):
            for j in range(m):
                out[i, j] = 0.0
            for k in range(D):
                y = means[k] + eps * z[i, k]
                q = y * y - e2
                for j in range(m):
                    out[i, j] += weights[j, k] * q

    def chi2_statistics_numba(z, means, eps, weights):
        out = np.empty((z.shape[0], weights.shape[0]))
        _chi2_jit(
            np.ascontiguousarray(z, dtype=np.float64),
            np.ascontiguousarray(means, dtype=np.float64),
            float(eps),
            np.ascontiguousarray(weights, dtype=np.float64),
            out,
        )
        return out

    BACKEND = "numba"
    chi2_statistics = chi2_statistics_numba
else:
    chi2_statistics_numba = None
    BACKEND = "numpy"
    chi2_statistics = chi2_statistics_numpy
