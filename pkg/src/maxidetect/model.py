"""Sequence space model: operator spectra, signals, schedules and the sampler.

Observations follow ``y_k = b_k * theta_k + eps * xi_k`` for k = 1, 2, ...
with ``xi_k`` i.i.d. standard Gaussian. Indices are 1-based throughout the
public API; arrays returned by ``values(D)`` / ``coefficients(D)`` hold
entries k = 1..D at positions 0..D-1.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import generator
from .series import NonSummable, dyadic_index, dyadic_tail, power_sum

__all__ = [
    "NonSummable",
    "NumericalOverflow",
    "OperatorSpectrum",
    "Signal",
    "FiniteSupport",
    "PowerDecay",
    "DyadicBlock",
    "zero_signal",
    "spike",
    "DesignSchedule",
    "RateSchedule",
    "EpsilonGrid",
    "spectrum_value",
    "prefix_sum_inv4",
    "signal_prefix_energy",
    "signal_tail_energy",
    "sample_observations",
    "evaluate_schedules",
]


class NumericalOverflow(ArithmeticError):
    """A running sum left the range of double precision."""


# ---------------------------------------------------------------------------
# Operator spectra
# ---------------------------------------------------------------------------

_SPECTRUM_FAMILIES = ("identity", "mildly_ill_posed", "explicit")


@dataclass(frozen=True)
class OperatorSpectrum:
    """Eigenvalue sequence (b_k).

    ``explicit`` spectra list b_1..b_L and continue as
    ``b_k = b_L * (k / L) ** -tail_exponent`` for k > L.
    """

    family: str = "identity"
    t: float = 0.0
    prefix: tuple[float, ...] = ()
    tail_exponent: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        if self.family not in _SPECTRUM_FAMILIES:
            raise ValueError(f"unknown spectrum family {self.family!r}")
        if self.family == "mildly_ill_posed" and not (self.t >= 0 and math.isfinite(self.t)):
            raise ValueError(f"ill-posedness degree must be a finite t >= 0, got {self.t}")
        if self.family == "explicit":
            pre = tuple(float(v) for v in self.prefix)
            object.__setattr__(self, "prefix", pre)
            if not pre:
                raise ValueError("explicit spectrum needs a non-empty prefix")
            if any(not (v > 0 and math.isfinite(v)) for v in pre):
                raise ValueError("spectrum values must be positive and finite")
            if any(b > a for a, b in zip(pre, pre[1:])):
                raise ValueError("spectrum prefix must be non-increasing")
            if not self.tail_exponent >= 0:
                raise ValueError("tail exponent must be >= 0")

    @classmethod
    def identity(cls) -> "OperatorSpectrum":
        return cls("identity")

    @classmethod
    def mildly_ill_posed(cls, t: float) -> "OperatorSpectrum":
        return cls("mildly_ill_posed", t=float(t))

    @classmethod
    def explicit(cls, prefix, tail_exponent: float = 0.0) -> "OperatorSpectrum":
        return cls("explicit", prefix=tuple(prefix), tail_exponent=float(tail_exponent))

    def tail_law(self) -> tuple[int, float, float]:
        """(k0, c, t) such that b_k = c * k**-t for every k > k0."""
        if self.family == "identity":
            return 0, 1.0, 0.0
        if self.family == "mildly_ill_posed":
            return 0, 1.0, self.t
        L = len(self.prefix)
        return L, self.prefix[-1] * L**self.tail_exponent, self.tail_exponent

    def values(self, D: int) -> np.ndarray:
        """b_1, ..., b_D."""
        D = int(D)
        k = np.arange(1, D + 1, dtype=np.float64)
        if self.family == "identity":
            return np.ones(D)
        if self.family == "mildly_ill_posed":
            return k**-self.t
        L = len(self.prefix)
        out = np.empty(D)
        head = min(D, L)
        out[:head] = self.prefix[:head]
        if D > L:
            out[L:] = self.prefix[-1] * (k[L:] / L) ** -self.tail_exponent
        return out

    def value(self, k: int) -> float:
        if k < 1:
            raise ValueError("frequency index starts at 1")
        if self.family == "explicit" and k <= len(self.prefix):
            return self.prefix[k - 1]
        _, c, t = self.tail_law()
        return c * float(k) ** -t

    def inv4_cumsum(self, D: int) -> np.ndarray:
        """Read-only view of the prefix sums sum_{j<=k} b_j**-4 for k = 1..D."""
        D = int(D)
        if D < 1:
            raise ValueError("D must be >= 1")
        cs = self._cache.get("inv4")
        if cs is None or len(cs) < D:
            with self._lock:
                cs = self._cache.get("inv4")
                if cs is None or len(cs) < D:
                    size = max(D, 2 * len(cs) if cs is not None else 1024)
                    with np.errstate(over="ignore"):
                        cs = np.cumsum(self.values(size) ** -4.0)
                    bad = ~np.isfinite(cs)
                    if bad.any():
                        first = int(np.argmax(bad)) + 1
                        if first <= D:
                            raise NumericalOverflow(
                                f"sum of b_k**-4 overflows double precision at k={first}"
                            )
                        cs = cs[: first - 1]
                    cs.setflags(write=False)
                    self._cache["inv4"] = cs
        return cs[:D]

    def prefix_sum_inv4(self, D: int) -> float:
        return float(self.inv4_cumsum(D)[-1])


def spectrum_value(spec: OperatorSpectrum, k: int) -> float:
    return spec.value(k)


def prefix_sum_inv4(spec: OperatorSpectrum, D: int) -> float:
    """sum_{k=1}^{D} b_k**-4 (cached prefix sums)."""
    return spec.prefix_sum_inv4(D)


# ---------------------------------------------------------------------------
# Signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signal:
    """Base class for square-summable signal families.

    ``scale`` multiplies every coordinate; ``zeroed`` zeroes coordinates
    1..zeroed (decimation mask).
    """

    scale: float = field(default=1.0, kw_only=True)
    zeroed: int = field(default=0, kw_only=True)

    def _raw(self, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pure_tail(self, m: int, extra: float) -> float:
        """sum_{k>m} raw_k**2 * k**-extra, unscaled and unmasked."""
        raise NotImplementedError

    def coefficients(self, D: int) -> np.ndarray:
        """theta_1, ..., theta_D."""
        k = np.arange(1, int(D) + 1, dtype=np.float64)
        out = self.scale * self._raw(k)
        out[: min(self.zeroed, len(out))] = 0.0
        return out

    def prefix_energy(self, D: int, weighted_by: OperatorSpectrum | None = None) -> float:
        D = int(D)
        if D < 0:
            raise ValueError("D must be non-negative")
        if D <= self.zeroed:
            return 0.0
        theta = self.coefficients(D)
        if weighted_by is not None:
            theta = theta * weighted_by.values(D)
        return math.fsum(theta * theta)

    def tail_energy(self, D: int, weighted_by: OperatorSpectrum | None = None) -> float:
        D = int(D)
        if D < 0:
            raise ValueError("D must be non-negative")
        m = max(D, self.zeroed)
        if weighted_by is None:
            k0, c, t = 0, 1.0, 0.0
        else:
            k0, c, t = weighted_by.tail_law()
        parts = []
        if m < k0:
            # weights not yet power-law: sum the explicit part of the spectrum directly
            k = np.arange(m + 1, k0 + 1, dtype=np.float64)
            w = weighted_by.values(k0)[m:]
            parts.append(math.fsum((w * self._raw(k)) ** 2))
            m = k0
        parts.append(c * c * self._pure_tail(m, 2.0 * t))
        return self.scale**2 * math.fsum(parts)

    def total_energy(self, weighted_by: OperatorSpectrum | None = None) -> float:
        return self.tail_energy(0, weighted_by)

    def scaled(self, rho: float) -> "Signal":
        return replace(self, scale=self.scale * rho)

    def decimated(self, n: int) -> "Signal":
        return replace(self, zeroed=max(self.zeroed, int(n)))


@dataclass(frozen=True)
class FiniteSupport(Signal):
    values: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def _raw(self, k):
        v = np.asarray(self.values, dtype=np.float64)
        idx = np.asarray(k, dtype=np.int64) - 1
        out = np.zeros(idx.shape)
        inside = idx < len(v)
        out[inside] = v[idx[inside]]
        return out

    def tail_energy(self, D, weighted_by=None):
        D = int(D)
        if D < 0:
            raise ValueError("D must be non-negative")
        L = len(self.values)
        m = max(D, self.zeroed)
        if m >= L:
            return 0.0
        theta = self.scale * np.asarray(self.values[m:], dtype=np.float64)
        if weighted_by is not None:
            theta = theta * weighted_by.values(L)[m:]
        return math.fsum(theta * theta)


@dataclass(frozen=True)
class PowerDecay(Signal):
    """theta_k = c * k**-a, a > 1/2."""

    c: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0.5:
            raise NonSummable(f"power decay needs a > 1/2, got a={self.a}")

    def _raw(self, k):
        return self.c * np.asarray(k, dtype=np.float64) ** -self.a

    def _pure_tail(self, m, extra):
        return self.c * self.c * power_sum(2.0 * self.a + extra, m + 1)


@dataclass(frozen=True)
class DyadicBlock(Signal):
    """theta_k = 2**(-j*s) * k**-gamma for 2**j <= k < 2**(j+1), j >= 0."""

    s: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.s > 0 and self.gamma > 0):
            raise ValueError("dyadic block parameters must be positive")
        if not 2.0 * self.s + 2.0 * self.gamma - 1.0 > 0:
            raise NonSummable(f"dyadic block needs 2s + 2gamma > 1 (s={self.s}, gamma={self.gamma})")

    def _raw(self, k):
        k = np.asarray(k, dtype=np.float64)
        return 2.0 ** (-dyadic_index(k) * self.s) * k**-self.gamma

    def _pure_tail(self, m, extra):
        return dyadic_tail(self.s, 2.0 * self.gamma + extra, m)


def zero_signal() -> FiniteSupport:
    return FiniteSupport(())


def spike(k: int, value: float) -> FiniteSupport:
    """Signal with a single non-zero coordinate theta_k = value."""
    if k < 1:
        raise ValueError("spike position starts at 1")
    vals = [0.0] * k
    vals[-1] = float(value)
    return FiniteSupport(tuple(vals))


def signal_prefix_energy(sig: Signal, D: int) -> float:
    return sig.prefix_energy(D)


def signal_tail_energy(sig: Signal, D: int, weighted_by: OperatorSpectrum | None = None) -> float:
    return sig.tail_energy(D, weighted_by)


# ---------------------------------------------------------------------------
# Schedules and grids
# ---------------------------------------------------------------------------


def _check_eps(eps: float):
    if not 0.0 < eps < 1.0:
        raise ValueError(f"noise level must lie in (0, 1), got {eps}")


def _table_lookup(table, eps):
    for e, v in table:
        if math.isclose(e, eps, rel_tol=1e-12, abs_tol=0.0):
            return v
    raise KeyError(f"no table entry for eps={eps}")


@dataclass(frozen=True)
class DesignSchedule:
    """eps -> D_eps, number of frequencies used by the tests."""

    family: str = "constant"
    D: int = 1
    s: float = 0.0
    t: float = 0.0
    table: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        if self.family == "constant":
            if int(self.D) < 1:
                raise ValueError("constant design needs D >= 1")
        elif self.family == "minimax_mip":
            if not (self.s > 0 and self.t >= 0):
                raise ValueError("minimax design needs s > 0, t >= 0")
        elif self.family == "table":
            tab = tuple((float(e), int(d)) for e, d in self.table)
            if not tab or any(d < 1 for _, d in tab):
                raise ValueError("design table needs entries with D >= 1")
            object.__setattr__(self, "table", tab)
        else:
            raise ValueError(f"unknown design family {self.family!r}")

    @classmethod
    def constant(cls, D: int) -> "DesignSchedule":
        return cls("constant", D=int(D))

    @classmethod
    def minimax_mip(cls, s: float, t: float) -> "DesignSchedule":
        return cls("minimax_mip", s=float(s), t=float(t))

    @classmethod
    def from_table(cls, pairs) -> "DesignSchedule":
        return cls("table", table=tuple(pairs))

    def __call__(self, eps: float) -> int:
        _check_eps(eps)
        if self.family == "constant":
            return int(self.D)
        if self.family == "minimax_mip":
            return max(1, math.ceil(eps ** (-4.0 / (1.0 + 4.0 * (self.s + self.t)))))
        return max(1, _table_lookup(self.table, eps))


@dataclass(frozen=True)
class RateSchedule:
    """eps -> r_eps (or mu_eps).

    ``spectral`` rates are mu_eps = b_{D_eps} * r_eps built by
    ``maxisets.mu_from_r``; ``scaled`` rates are c * base(eps).
    """

    family: str = "power_law"
    c: float = 1.0
    e: float = 1.0
    s: float = 0.0
    t: float = 0.0
    table: tuple[tuple[float, float], ...] = ()
    base: "RateSchedule | None" = None
    design: DesignSchedule | None = None
    spectrum: OperatorSpectrum | None = None

    def __post_init__(self):
        if self.family == "power_law":
            if not (self.c > 0 and self.e > 0):
                raise ValueError("power-law rate needs c > 0, e > 0")
        elif self.family == "minimax_ip":
            if not (self.s > 0 and self.t >= 0):
                raise ValueError("minimax rate needs s > 0, t >= 0")
        elif self.family == "table":
            tab = tuple((float(e), float(r)) for e, r in self.table)
            if not tab or any(r <= 0 for _, r in tab):
                raise ValueError("rate table needs positive entries")
            object.__setattr__(self, "table", tab)
        elif self.family == "spectral":
            if self.base is None or self.design is None or self.spectrum is None:
                raise ValueError("spectral rate needs base, design and spectrum")
        elif self.family == "scaled":
            if self.base is None or not self.c > 0:
                raise ValueError("scaled rate needs a base and c > 0")
        else:
            raise ValueError(f"unknown rate family {self.family!r}")

    @classmethod
    def power_law(cls, c: float, e: float) -> "RateSchedule":
        return cls("power_law", c=float(c), e=float(e))

    @classmethod
    def minimax_ip(cls, s: float, t: float) -> "RateSchedule":
        return cls("minimax_ip", s=float(s), t=float(t))

    @classmethod
    def from_table(cls, pairs) -> "RateSchedule":
        return cls("table", table=tuple(pairs))

    def times(self, factor: float) -> "RateSchedule":
        """eps -> factor * r_eps."""
        return RateSchedule("scaled", c=float(factor), base=self)

    def __call__(self, eps: float) -> float:
        _check_eps(eps)
        if self.family == "scaled":
            return self.c * self.base(eps)
        if self.family == "power_law":
            return self.c * eps**self.e
        if self.family == "minimax_ip":
            return eps ** (4.0 * self.s / (1.0 + 4.0 * (self.s + self.t)))
        if self.family == "table":
            return _table_lookup(self.table, eps)
        return self.spectrum.value(self.design(eps)) * self.base(eps)


@dataclass(frozen=True)
class EpsilonGrid:
    """Finite, strictly decreasing set of noise levels in (0, 1)."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise ValueError("epsilon grid must be non-empty")
        if any(not 0.0 < p < 1.0 for p in pts):
            raise ValueError("epsilon grid points must lie in (0, 1)")
        if any(b >= a for a, b in zip(pts, pts[1:])):
            raise ValueError("epsilon grid must be strictly decreasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def geometric(cls, start: float = 0.5, ratio: float = 0.8, n: int = 20) -> "EpsilonGrid":
        return cls(tuple(start * ratio**i for i in range(n)))

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def describe(self) -> str:
        return f"{len(self.points)} points in [{self.points[-1]:.6g}, {self.points[0]:.6g}]"


DEFAULT_GRID = EpsilonGrid.geometric()


def evaluate_schedules(D: DesignSchedule, r: RateSchedule, grid: EpsilonGrid):
    """[(eps, D_eps, r_eps)] over the grid."""
    return [(eps, D(eps), r(eps)) for eps in grid]


# ---------------------------------------------------------------------------
# Sampler
# ---------------------------------------------------------------------------


def sample_observations(sig: Signal, spec: OperatorSpectrum, eps: float, D: int, seed: int) -> np.ndarray:
    """y_1..y_D; ``eps=0`` returns the noiseless means (debug mode)."""
    D = int(D)
    if D < 1:
        raise ValueError("D must be >= 1")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"noise level must lie in [0, 1), got {eps}")
    means = spec.values(D) * sig.coefficients(D)
    if eps == 0.0:
        return means
    return means + eps * generator(seed).standard_normal(D)
