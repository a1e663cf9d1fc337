"""Independent reference computations used by the tests.

Tail energies are computed by plain summation of the first ``BRUTE_LIMIT``
terms plus a remainder from mpmath's Hurwitz zeta function, which shares no
code with the package's Euler-Maclaurin evaluation.
"""

import math

import mpmath
import numpy as np

BRUTE_LIMIT = 10**7
_CHUNK = 1 << 20

mpmath.mp.dps = 40


def brute_sum(term, start, stop):
    """sum_{k=start}^{stop} term(k) with k as float64 arrays, chunked."""
    total = 0.0
    parts = []
    for lo in range(start, stop + 1, _CHUNK):
        k = np.arange(lo, min(lo + _CHUNK, stop + 1), dtype=np.float64)
        parts.append(float(np.sum(term(k))))
    total = math.fsum(parts)
    return total


def hurwitz_tail(p, m):
    """sum_{k>m} k**-p."""
    return float(mpmath.zeta(p, m + 1))


def power_decay_tail(c, a, D, extra=0.0):
    """sum_{k>D} c**2 k**(-2a - extra), brute force to BRUTE_LIMIT then zeta."""
    p = 2.0 * a + extra
    head = brute_sum(lambda k: c * c * k**-p, D + 1, BRUTE_LIMIT) if D < BRUTE_LIMIT else 0.0
    return head + c * c * hurwitz_tail(p, max(D, BRUTE_LIMIT))


def _block_sum(p, lo, hi):
    """sum_{k=lo}^{hi-1} k**-p."""
    if p == 1.0:
        return mpmath.digamma(hi) - mpmath.digamma(lo)
    return mpmath.zeta(p, lo) - mpmath.zeta(p, hi)


def dyadic_tail(s, gamma, D, extra=0.0, tol=1e-20):
    """sum_{k>D} 2**(-2 j(k) s) k**(-2 gamma - extra), j(k) = floor(log2 k)."""
    p = 2.0 * gamma + extra

    def term(k):
        j = np.floor(np.log2(k))
        # guard the float log2 at exact powers of two
        j = np.where(2.0 ** (j + 1) <= k, j + 1, j)
        j = np.where(2.0**j > k, j - 1, j)
        return 2.0 ** (-2.0 * j * s) * k**-p

    head = brute_sum(term, D + 1, BRUTE_LIMIT) if D < BRUTE_LIMIT else 0.0
    # remainder block by block: [max(m+1, 2^j), 2^(j+1) - 1]
    m = max(D, BRUTE_LIMIT)
    j = int(math.floor(math.log2(m + 1)))
    rem = mpmath.mpf(0)
    while True:
        lo = max(m + 1, 2**j)
        hi = 2 ** (j + 1)
        block = mpmath.power(2, -2 * j * s) * _block_sum(p, lo, hi)
        rem += block
        if block < tol * rem:
            break
        j += 1
        if j > 100_000:
            raise RuntimeError("dyadic remainder did not converge")
    return head + float(rem)


def finite_tail(values, D, weights=None):
    v = np.asarray(values, dtype=np.float64)[D:]
    if weights is not None:
        v = v * np.asarray(weights, dtype=np.float64)[D : D + len(v)]
    return math.fsum(v * v)


def inv4_sum(b):
    return math.fsum(np.asarray(b, dtype=np.float64) ** -4)


def chi2_null_variance_ip(b, eps):
    """Var of sum b^-2 (y^2 - eps^2) under H0: 2 eps^4 sum b^-4."""
    return 2.0 * eps**4 * inv4_sum(b)


def chi2_mean_ip(b, theta):
    """E of sum b^-2 (y^2 - eps^2) under theta: sum theta^2."""
    return math.fsum(np.asarray(theta, dtype=np.float64) ** 2)
