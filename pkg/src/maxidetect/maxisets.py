"""Maxiset membership predicates evaluated on a finite epsilon grid.

Universal quantifiers over eps in (0, 1) and k in N are checked on finite
ranges only; every verdict carries the range that was checked.

Predicates (C > 0, D = D_eps, R = sum_{k<=D} b_k**-4):

    F      ||theta||^2 >= r^2  =>  sum_{k<=D} theta_k^2         > C eps^2 sqrt(R)
    G      ||theta||^2 >= mu^2 =>  sum_{k<=D} b_k^2 theta_k^2   > C eps^2 sqrt(D)
    F_dec  sum_{k>D} theta_k^2       < r^2  - C eps^2 sqrt(R)
    G_dec  sum_{k>D} b_k^2 theta_k^2 < mu^2 - C eps^2 sqrt(D)

Comparisons are plain IEEE comparisons with no slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DesignSchedule,
    DyadicBlock,
    EpsilonGrid,
    OperatorSpectrum,
    RateSchedule,
    Signal,
)

__all__ = [
    "Violation",
    "MembershipVerdict",
    "AdmissibilityVerdict",
    "EmbeddingCheck",
    "decimate",
    "member_F",
    "member_G",
    "member_F_dec",
    "member_G_dec",
    "admissible_F",
    "admissible_G",
    "mu_from_r",
    "check_embedding_condition",
    "besov_sup_functional",
    "dyadic_block_signal",
    "decimation_witness",
]


@dataclass(frozen=True)
class Violation:
    epsilon: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    violations: tuple[Violation, ...]
    grid: EpsilonGrid
    predicate: str = ""

    @property
    def first_violation(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "predicate": self.predicate,
            "grid": list(self.grid.points),
            "violations": [{"epsilon": v.epsilon, "lhs": v.lhs, "rhs": v.rhs} for v in self.violations],
        }


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    slack: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {"admissible": self.admissible, "slack": [list(s) for s in self.slack]}


@dataclass(frozen=True)
class EmbeddingCheck:
    holds: bool
    k_max: int
    first_violation: int | None = None
    lhs: float | None = None
    rhs: float | None = None
    worst_ratio: float = field(default=math.nan)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "k_max": self.k_max,
            "first_violation": self.first_violation,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "worst_ratio": self.worst_ratio,
        }


def decimate(sig: Signal, n: int) -> Signal:
    """Zero coordinates 1..n."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return sig.decimated(n)


def _verdict(rows, grid, name) -> MembershipVerdict:
    bad = tuple(Violation(e, l, r) for e, l, r, ok in rows if not ok)
    return MembershipVerdict(not bad, bad, grid, name)


def member_F(sig, r: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, C: float, grid: EpsilonGrid) -> MembershipVerdict:
    energy = sig.total_energy()
    rows = []
    for eps in grid:
        if energy < r(eps) ** 2:
            continue
        d = D(eps)
        lhs = sig.prefix_energy(d)
        rhs = C * eps**2 * math.sqrt(spec.prefix_sum_inv4(d))
        rows.append((eps, lhs, rhs, lhs > rhs))
    return _verdict(rows, grid, "F")


def member_G(sig, mu: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, C: float, grid: EpsilonGrid,
             weighted_trigger: bool = False) -> MembershipVerdict:
    """``weighted_trigger`` uses ||b theta||^2 >= mu^2 as the triggering condition
    instead of ||theta||^2 >= mu^2."""
    energy = sig.total_energy(spec if weighted_trigger else None)
    rows = []
    for eps in grid:
        if energy < mu(eps) ** 2:
            continue
        d = D(eps)
        lhs = sig.prefix_energy(d, weighted_by=spec)
        rhs = C * eps**2 * math.sqrt(d)
        rows.append((eps, lhs, rhs, lhs > rhs))
    return _verdict(rows, grid, "G")


def member_F_dec(sig, r: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, C: float, grid: EpsilonGrid) -> MembershipVerdict:
    rows = []
    for eps in grid:
        d = D(eps)
        lhs = sig.tail_energy(d)
        rhs = r(eps) ** 2 - C * eps**2 * math.sqrt(spec.prefix_sum_inv4(d))
        rows.append((eps, lhs, rhs, lhs < rhs))
    return _verdict(rows, grid, "F_dec")


def member_G_dec(sig, mu: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, C: float, grid: EpsilonGrid) -> MembershipVerdict:
    rows = []
    for eps in grid:
        d = D(eps)
        lhs = sig.tail_energy(d, weighted_by=spec)
        rhs = mu(eps) ** 2 - C * eps**2 * math.sqrt(d)
        rows.append((eps, lhs, rhs, lhs < rhs))
    return _verdict(rows, grid, "G_dec")


def admissible_F(r: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, C: float, grid: EpsilonGrid) -> AdmissibilityVerdict:
    slack = tuple(
        (eps, r(eps) ** 2 - C * eps**2 * math.sqrt(spec.prefix_sum_inv4(D(eps)))) for eps in grid
    )
    return AdmissibilityVerdict(all(s > 0 for _, s in slack), slack)


def admissible_G(mu: RateSchedule, D: DesignSchedule, C: float, grid: EpsilonGrid) -> AdmissibilityVerdict:
    slack = tuple((eps, mu(eps) ** 2 - C * eps**2 * math.sqrt(D(eps))) for eps in grid)
    return AdmissibilityVerdict(all(s > 0 for _, s in slack), slack)


def mu_from_r(r: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum) -> RateSchedule:
    """eps -> b_{D_eps} * r_eps."""
    return RateSchedule("spectral", base=r, design=D, spectrum=spec)


def check_embedding_condition(spec: OperatorSpectrum, Cmin: float, Cmax_p: float, k_max: int = 10**6) -> EmbeddingCheck:
    """Check Cmax_p sqrt(k) <= Cmin b_k^2 sqrt(sum_{j<=k} b_j^-4) for k = 1..k_max."""
    k_max = int(k_max)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    k = np.arange(1, k_max + 1, dtype=np.float64)
    lhs = Cmax_p * np.sqrt(k)
    rhs = Cmin * spec.values(k_max) ** 2 * np.sqrt(spec.inv4_cumsum(k_max))
    bad = lhs > rhs
    # largest Cmax_p / Cmin for which the condition would hold on 1..k_max
    worst = float(np.min(rhs / lhs)) * Cmax_p / Cmin
    if not bad.any():
        return EmbeddingCheck(True, k_max, worst_ratio=worst)
    i = int(np.argmax(bad))
    return EmbeddingCheck(False, k_max, i + 1, float(lhs[i]), float(rhs[i]), worst)


DEFAULT_K = tuple(2**j for j in range(21))


def besov_sup_functional(sig: Signal, exponent: float, weighted_by: OperatorSpectrum | None = None, K_list=DEFAULT_K):
    """sup over K of K**exponent * sum_{k>K} (w_k theta_k)**2, with the per-K table."""
    table = []
    for K in K_list:
        K = int(K)
        if K < 1:
            raise ValueError("K must be >= 1")
        table.append((K, K**exponent * sig.tail_energy(K, weighted_by)))
    return max(v for _, v in table), table


def dyadic_block_signal(s: float, gamma: float = 1.0) -> DyadicBlock:
    return DyadicBlock(s=s, gamma=gamma)


def decimation_witness(sig: Signal, r: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum, Cmin: float, grid: EpsilonGrid):
    """First grid eps where sig leaves F_dec at rate sqrt(2) r and constant Cmin
    with its tail carrying more than r_eps^2, together with the decimated signal.

    Returns None if no grid point qualifies.
    """
    for eps in grid:
        d = D(eps)
        tail = sig.tail_energy(d)
        bound = 2.0 * r(eps) ** 2 - Cmin * eps**2 * math.sqrt(spec.prefix_sum_inv4(d))
        if tail >= bound and tail > r(eps) ** 2:
            return eps, decimate(sig, d)
    return None
