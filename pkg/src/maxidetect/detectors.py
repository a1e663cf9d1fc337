"""Inverse (IP) and direct (DP) chi-square detectors and their constants.

IP statistic  T = sum_{k<=D} b_k**-2 (y_k**2 - eps**2), threshold C1 eps**2 sqrt(sum b_k**-4)
DP statistic  S = sum_{k<=D}          (y_k**2 - eps**2), threshold C2 eps**2 sqrt(D)

Both reject when the statistic strictly exceeds the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .engine import simulate_statistics
from .model import DesignSchedule, EpsilonGrid, OperatorSpectrum

__all__ = [
    "LengthMismatch",
    "InvalidAlpha",
    "ConstantTooSmall",
    "Chebyshev",
    "MonteCarloCalibration",
    "ExplicitConstants",
    "DetectorConfig",
    "ConstantSet",
    "TestDecision",
    "statistic_ip",
    "statistic_dp",
    "threshold_ip",
    "threshold_dp",
    "test_ip",
    "test_dp",
    "calibrate_c1",
    "calibrate_c2",
    "c_max",
    "c_min",
    "resolve_constants",
]


class LengthMismatch(ValueError):
    pass


class InvalidAlpha(ValueError):
    pass


class ConstantTooSmall(ValueError):
    """The lower Type-II constant is undefined for this C1 and beta."""


@dataclass(frozen=True)
class Chebyshev:
    pass


@dataclass(frozen=True)
class MonteCarloCalibration:
    n: int = 1_000_000
    seed: int = 0


@dataclass(frozen=True)
class ExplicitConstants:
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("explicit constants must be positive")


CalibrationMode = Union[Chebyshev, MonteCarloCalibration, ExplicitConstants]


def _check_level(value: float, name: str):
    if not 0.0 < value < 0.5:
        raise InvalidAlpha(f"{name} must lie in (0, 1/2), got {value}")


@dataclass(frozen=True)
class DetectorConfig:
    alpha: float = 0.05
    beta: float = 0.1
    calibration: CalibrationMode = Chebyshev()

    def __post_init__(self):
        _check_level(self.alpha, "alpha")
        _check_level(self.beta, "beta")


@dataclass(frozen=True)
class ConstantSet:
    C1: float
    C2: float
    Cmax: float
    Cmin: float
    Cmax_p: float
    Cmin_p: float

    def __post_init__(self):
        if min(self.C1, self.C2, self.Cmax, self.Cmin, self.Cmax_p, self.Cmin_p) <= 0:
            raise ValueError("constants must be positive")
        if self.Cmin > self.Cmax or self.Cmin_p > self.Cmax_p:
            raise ValueError("lower constants must not exceed upper constants")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("C1", "C2", "Cmax", "Cmin", "Cmax_p", "Cmin_p")}


@dataclass(frozen=True)
class TestDecision:
    __test__ = False

    reject: bool
    statistic: float
    threshold: float


# ---------------------------------------------------------------------------
# Statistics and thresholds
# ---------------------------------------------------------------------------


def _centered_squares(y, eps: float, D: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if D < 1:
        raise ValueError("D must be >= 1")
    if len(y) < D:
        raise LengthMismatch(f"need {D} observations, got {len(y)}")
    y = y[:D]
    return y * y - eps * eps


def statistic_ip(y, spec: OperatorSpectrum, eps: float, D: int) -> float:
    q = _centered_squares(y, eps, D)
    return float(np.dot(spec.values(D) ** -2.0, q))


def statistic_dp(y, eps: float, D: int) -> float:
    q = _centered_squares(y, eps, D)
    return float(np.dot(np.ones(D), q))


def threshold_ip(C1: float, eps: float, spec: OperatorSpectrum, D: int) -> float:
    return C1 * eps**2 * math.sqrt(spec.prefix_sum_inv4(D))


def threshold_dp(C2: float, eps: float, D: int) -> float:
    return C2 * eps**2 * math.sqrt(D)


def test_ip(y, spec: OperatorSpectrum, eps: float, D: int, C1: float) -> TestDecision:
    stat = statistic_ip(y, spec, eps, D)
    thr = threshold_ip(C1, eps, spec, D)
    return TestDecision(stat > thr, stat, thr)


def test_dp(y, eps: float, D: int, C2: float) -> TestDecision:
    stat = statistic_dp(y, eps, D)
    thr = threshold_dp(C2, eps, D)
    return TestDecision(stat > thr, stat, thr)


# pytest would otherwise collect these when imported into a test module
test_ip.__test__ = False
test_dp.__test__ = False


# ---------------------------------------------------------------------------
# Type-I calibration
# ---------------------------------------------------------------------------


def _design_points(D, grid: EpsilonGrid | None) -> list[int]:
    if isinstance(D, DesignSchedule):
        if grid is None:
            raise ValueError("a design schedule needs an epsilon grid")
        return sorted({D(eps) for eps in grid})
    return [int(D)]


def _mc_quantile(weights: np.ndarray, norm: float, alpha: float, n: int, seed: int, workers) -> float:
    D = weights.shape[-1]
    stats = simulate_statistics(np.zeros(D), 1.0, weights, n, seed, workers)[:, 0]
    return float(np.quantile(stats / norm, 1.0 - alpha, method="inverted_cdf"))


def calibrate_c1(mode: CalibrationMode, alpha: float, spec: OperatorSpectrum, D, grid=None, workers=None) -> float:
    """Type-I constant of the inverse test.

    With a design schedule, the largest constant over the distinct D_eps on
    the grid is returned so that every grid point is controlled.
    """
    _check_level(alpha, "alpha")
    if isinstance(mode, ExplicitConstants):
        return mode.c1
    if isinstance(mode, Chebyshev):
        return math.sqrt(2.0 / alpha)
    out = []
    for d in _design_points(D, grid):
        w = spec.values(d) ** -2.0
        out.append(_mc_quantile(w[None, :], math.sqrt(spec.prefix_sum_inv4(d)), alpha, mode.n, mode.seed, workers))
    return max(out)


def calibrate_c2(mode: CalibrationMode, alpha: float, D, grid=None, workers=None) -> float:
    """Type-I constant of the direct test (see ``calibrate_c1``)."""
    _check_level(alpha, "alpha")
    if isinstance(mode, ExplicitConstants):
        return mode.c2
    if isinstance(mode, Chebyshev):
        return math.sqrt(2.0 / alpha)
    out = []
    for d in _design_points(D, grid):
        out.append(_mc_quantile(np.ones((1, d)), math.sqrt(d), alpha, mode.n, mode.seed, workers))
    return max(out)


# ---------------------------------------------------------------------------
# Type-II constants
# ---------------------------------------------------------------------------


def c_max(C1: float, beta: float) -> float:
    """max(C1, C*) with C* the root above C1 of (2 + 4C) / (C - C1)**2 = beta.

    The formula is defined for any beta in (0, 1); detector configurations
    restrict beta to (0, 1/2).
    """
    if not 0.0 < beta < 1.0:
        raise InvalidAlpha(f"beta must lie in (0, 1), got {beta}")
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    # beta*C**2 - (2*beta*C1 + 4)*C + (beta*C1**2 - 2) = 0; both terms of the
    # numerator are positive, so the larger root has no cancellation.
    b = 2.0 * beta * C1 + 4.0
    disc = 16.0 * beta * C1 + 16.0 + 8.0 * beta
    root = (b + math.sqrt(disc)) / (2.0 * beta)
    return max(C1, root)


def c_min(C1: float, beta: float) -> float:
    """(sqrt(2x + C1 - 4 sqrt(x)) - sqrt(2x)) ** 0.5 with x = -log(1 - beta)."""
    if not 0.0 < beta < 1.0:
        raise InvalidAlpha(f"beta must lie in (0, 1), got {beta}")
    x = -math.log1p(-beta)
    inner = 2.0 * x + (C1 - 4.0 * math.sqrt(x))
    if inner < 0:
        raise ConstantTooSmall(
            f"C_min precondition failed: -2log(1-beta) + C1 - 4sqrt(-log(1-beta)) = {inner:.6g} < 0 "
            f"(C1={C1:.6g}, beta={beta:.6g}); C1 must be larger"
        )
    diff = math.sqrt(inner) - math.sqrt(2.0 * x)
    if diff <= 0:
        raise ConstantTooSmall(
            f"C_min undefined: sqrt(-2log(1-beta) + C1 - 4sqrt(-log(1-beta))) <= sqrt(-2log(1-beta)) "
            f"(C1={C1:.6g}, beta={beta:.6g}); C1 must exceed 4sqrt(-log(1-beta))"
        )
    return math.sqrt(diff)


def resolve_constants(cfg: DetectorConfig, spec: OperatorSpectrum, D, grid=None, workers=None) -> ConstantSet:
    C1 = calibrate_c1(cfg.calibration, cfg.alpha, spec, D, grid, workers)
    C2 = calibrate_c2(cfg.calibration, cfg.alpha, D, grid, workers)
    return ConstantSet(
        C1=C1,
        C2=C2,
        Cmax=c_max(C1, cfg.beta),
        Cmin=c_min(C1, cfg.beta),
        Cmax_p=c_max(C2, cfg.beta),
        Cmin_p=c_min(C2, cfg.beta),
    )
