"""Tail sums of power-law and dyadic-block sequences.

Everything here evaluates sums of the form ``sum_k w(k) * k**(-p)`` over
integer ranges. Short head ranges are summed directly; ranges starting at
``k >= DIRECT_LIMIT`` use an Euler-Maclaurin expansion whose truncation error
is below double precision there. For dyadic-block weights
``w(k) = 2**(-2*j*s)`` with ``2**j <= k < 2**(j+1)`` the block expansion is
summed over ``j`` in closed form, so arbitrarily slow geometric decay costs
nothing extra.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["DIRECT_LIMIT", "NonSummable", "power_sum", "dyadic_tail", "dyadic_index"]

DIRECT_LIMIT = 2**14

# B_2/2!, B_4/4!, B_6/6!
_EM_COEFS = (1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0)
_LN2 = math.log(2.0)


class NonSummable(ValueError):
    """Raised when a requested infinite sum diverges."""


def _rising(p: float, n: int) -> float:
    out = 1.0
    for i in range(n):
        out *= p + i
    return out


def _integral(p: float, a: float, b: float | None) -> float:
    """Integral of x**-p over [a, b] (b=None means infinity)."""
    if b is None:
        return a ** (1.0 - p) / (p - 1.0)
    if p == 1.0:
        return math.log(b / a)
    # a**(1-p) * (1 - (b/a)**(1-p)) / (p-1), without cancellation for p near 1
    return -(a ** (1.0 - p)) * math.expm1((1.0 - p) * math.log(b / a)) / (p - 1.0)


def _deriv(p: float, n: int, x: float) -> float:
    """n-th derivative of x**-p."""
    return (-1) ** n * _rising(p, n) * x ** (-p - n)


def _euler_maclaurin(p: float, a: int, b: int | None) -> float:
    fa = float(a) ** -p
    if b is None:
        terms = [_integral(p, float(a), None), 0.5 * fa]
        for m, coef in enumerate(_EM_COEFS, start=1):
            terms.append(-coef * _deriv(p, 2 * m - 1, float(a)))
        return math.fsum(terms)
    fb = float(b) ** -p
    terms = [_integral(p, float(a), float(b)), 0.5 * (fa + fb)]
    for m, coef in enumerate(_EM_COEFS, start=1):
        terms.append(coef * (_deriv(p, 2 * m - 1, float(b)) - _deriv(p, 2 * m - 1, float(a))))
    return math.fsum(terms)


def power_sum(p: float, a: int, b: int | None = None) -> float:
    """Return ``sum_{k=a}^{b} k**-p`` (``b=None`` sums to infinity).

    Raises NonSummable for an infinite range with ``p <= 1``.
    """
    a = int(a)
    if a < 1:
        raise ValueError("summation must start at k >= 1")
    if b is None and p <= 1.0:
        raise NonSummable(f"sum of k**-{p} diverges")
    if b is not None and b < a:
        return 0.0
    parts = []
    if a < DIRECT_LIMIT:
        hi = DIRECT_LIMIT - 1 if b is None else min(int(b), DIRECT_LIMIT - 1)
        k = np.arange(a, hi + 1, dtype=np.float64)
        parts.append(math.fsum(k**-p))
        a = DIRECT_LIMIT
    if b is None or b >= a:
        parts.append(_euler_maclaurin(p, a, None if b is None else int(b)))
    return math.fsum(parts)


def dyadic_index(k):
    """Block index j with ``2**j <= k < 2**(j+1)`` (vectorised, exact)."""
    return np.frexp(np.asarray(k, dtype=np.float64))[1] - 1


def _block_expansion(p: float):
    """(coefficient, exponent) pairs with sum_{k=a}^{2a-1} k**-p ~ sum c * a**-e."""
    if p == 1.0:
        lead = _LN2
    else:
        lead = -math.expm1((1.0 - p) * _LN2) / (p - 1.0)
    return [
        (lead, p - 1.0),
        (0.5 * -math.expm1(-p * _LN2), p),
        (p * -math.expm1(-(p + 1.0) * _LN2) / 12.0, p + 1.0),
        (-_rising(p, 3) * -math.expm1(-(p + 3.0) * _LN2) / 720.0, p + 3.0),
        (_rising(p, 5) * -math.expm1(-(p + 5.0) * _LN2) / 30240.0, p + 5.0),
    ]


def _geometric_blocks(s: float, p: float, j_start: int) -> float:
    """sum_{j >= j_start} 2**(-2js) * sum_{k=2^j}^{2^(j+1)-1} k**-p, in closed form."""
    total = []
    for coef, e in _block_expansion(p):
        rate = 2.0 * s + e
        # q**j_start / (1 - q) with q = 2**-rate
        total.append(coef * math.exp(-rate * j_start * _LN2) / -math.expm1(-rate * _LN2))
    return math.fsum(total)


def dyadic_tail(s: float, p: float, m: int) -> float:
    """Return ``sum_{k > m} 2**(-2*j(k)*s) * k**-p`` with j(k) the dyadic block of k.

    Converges iff ``2*s + p > 1``.
    """
    if 2.0 * s + p <= 1.0:
        raise NonSummable(f"dyadic tail diverges for s={s}, p={p}")
    m = int(m)
    if m < 0:
        raise ValueError("m must be non-negative")
    start = m + 1
    j0 = int(dyadic_index(start))
    j_geo = max(j0 + 1, int(math.log2(DIRECT_LIMIT)))
    parts = [2.0 ** (-2.0 * j0 * s) * power_sum(p, start, 2 ** (j0 + 1) - 1)]
    for j in range(j0 + 1, j_geo):
        parts.append(2.0 ** (-2.0 * j * s) * power_sum(p, 2**j, 2 ** (j + 1) - 1))
    parts.append(_geometric_blocks(s, p, j_geo))
    return math.fsum(parts)
