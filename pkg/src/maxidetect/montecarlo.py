"""Monte Carlo estimation of error probabilities and verification experiments.

Statistical assertions use a buffer of three standard errors on each side.
Every estimate is a pure function of its inputs, the master seed and n.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import maxisets
from .detectors import ConstantSet, threshold_dp, threshold_ip
from .engine import simulate_statistics
from .model import (
    DesignSchedule,
    EpsilonGrid,
    OperatorSpectrum,
    RateSchedule,
    Signal,
    spike,
    zero_signal,
)
from .rng import check_seed, derive_seed

__all__ = [
    "ConstraintUnsatisfiable",
    "McEstimate",
    "PowerCurve",
    "simulate_decisions",
    "estimate_type1",
    "estimate_type2",
    "verify_prop61",
    "verify_prop62",
    "verify_maxiset_sandwich",
    "power_curve",
    "separation_energy",
    "compare_ip_dp",
]

SE_BUFFER = 3.0


class ConstraintUnsatisfiable(ValueError):
    pass


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    n: int
    count: int
    se: float
    master_seed: int

    @classmethod
    def from_count(cls, count: int, n: int, seed: int) -> "McEstimate":
        p = count / n
        return cls(p, n, int(count), math.sqrt(p * (1.0 - p) / n), seed)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_detector(detector: str) -> str:
    d = detector.upper()
    if d not in ("IP", "DP"):
        raise ValueError(f"detector must be 'IP' or 'DP', got {detector!r}")
    return d


def _threshold(detector: str, constant: float, eps: float, spec: OperatorSpectrum, D: int) -> float:
    if detector == "IP":
        return threshold_ip(constant, eps, spec, D)
    return threshold_dp(constant, eps, D)


def simulate_decisions(sig: Signal, spec: OperatorSpectrum, eps: float, D: int, constants: dict, n: int, seed: int,
                       workers=None) -> dict:
    """Rejection counts of each detector in ``constants`` ({"IP": C1, "DP": C2}) on
    one shared set of n replications."""
    D = int(D)
    means = spec.values(D) * sig.coefficients(D)
    names = [_check_detector(k) for k in constants]
    rows = [spec.values(D) ** -2.0 if d == "IP" else np.ones(D) for d in names]
    stats = simulate_statistics(means, eps, np.vstack(rows), n, seed, workers)
    out = {}
    for j, (d, c) in enumerate(zip(names, constants.values())):
        out[d] = int(np.count_nonzero(stats[:, j] > _threshold(d, c, eps, spec, D)))
    return out


def estimate_type1(detector: str, spec: OperatorSpectrum, eps: float, D: int, constant: float, n: int, seed: int,
                   workers=None) -> McEstimate:
    """Fraction of n null replications where the detector rejects."""
    d = _check_detector(detector)
    rej = simulate_decisions(zero_signal(), spec, eps, D, {d: constant}, n, seed, workers)[d]
    return McEstimate.from_count(rej, n, check_seed(seed))


def estimate_type2(detector: str, sig: Signal, spec: OperatorSpectrum, eps: float, D: int, constant: float, n: int,
                   seed: int, workers=None) -> McEstimate:
    """Fraction of n replications under ``sig`` where the detector accepts H0."""
    d = _check_detector(detector)
    rej = simulate_decisions(sig, spec, eps, D, {d: constant}, n, seed, workers)[d]
    return McEstimate.from_count(n - rej, n, check_seed(seed))


# ---------------------------------------------------------------------------
# Single-eps bound verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    detector: str
    case: str
    eps: float
    D: int
    position: int
    constant: float
    energy: float
    bound: float
    beta: float
    estimate: McEstimate
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimate"] = self.estimate.to_dict()
        return d


def _verify_bound(detector, case, spec, eps, D, constants: ConstantSet, beta, margin, n, seed, position, workers):
    if case not in ("i", "ii"):
        raise ValueError("case must be 'i' or 'ii'")
    if margin < 0:
        raise ConstraintUnsatisfiable(f"margin must be non-negative, got {margin}")
    if case == "ii" and margin >= 1:
        raise ConstraintUnsatisfiable("case ii needs margin < 1 to keep a positive energy")
    D = int(D)
    position = D if position is None else int(position)
    if not 1 <= position <= D:
        raise ValueError("spike must sit inside the tested frequencies")
    if detector == "IP":
        c_upper, c_lower, thr_const = constants.Cmax, constants.Cmin, constants.C1
        scale = eps**2 * math.sqrt(spec.prefix_sum_inv4(D))
    else:
        c_upper, c_lower, thr_const = constants.Cmax_p, constants.Cmin_p, constants.C2
        scale = eps**2 * math.sqrt(D)
    const = c_upper if case == "i" else c_lower
    energy = (1.0 + margin if case == "i" else 1.0 - margin) * const * scale
    # IP bounds constrain sum theta_k^2, DP bounds sum b_k^2 theta_k^2
    b = spec.value(position)
    theta = math.sqrt(energy) if detector == "IP" else math.sqrt(energy) / b
    est = estimate_type2(detector, spike(position, theta), spec, eps, D, thr_const, n, seed, workers)
    if case == "i":
        passed = est.p_hat <= beta + SE_BUFFER * est.se
    else:
        passed = est.p_hat > beta - SE_BUFFER * est.se
    return BoundReport(detector, case, eps, D, position, const, energy, const * scale, beta, est, passed)


def verify_prop61(case: str, spec: OperatorSpectrum, eps: float, D: int, constants: ConstantSet, beta: float,
                  margin: float = 0.05, n: int = 100_000, seed: int = 0, position: int | None = None,
                  workers=None) -> BoundReport:
    """Type-II bounds of the inverse test on a single spike.

    Case "i" puts (1 + margin) Cmax eps^2 sqrt(R) of energy on the spike and
    expects Type-II <= beta; case "ii" puts (1 - margin) Cmin eps^2 sqrt(R)
    and expects Type-II > beta. The spike sits at k = D by default, where the
    statistic's variance is largest.
    """
    return _verify_bound("IP", case, spec, eps, D, constants, beta, margin, n, seed, position, workers)


def verify_prop62(case: str, spec: OperatorSpectrum, eps: float, D: int, constants: ConstantSet, beta: float,
                  margin: float = 0.05, n: int = 100_000, seed: int = 0, position: int | None = None,
                  workers=None) -> BoundReport:
    """Direct-test counterpart of ``verify_prop61`` with b^2-weighted energy."""
    return _verify_bound("DP", case, spec, eps, D, constants, beta, margin, n, seed, position, workers)


# ---------------------------------------------------------------------------
# Maxiset sandwich
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SandwichRow:
    eps: float
    D: int
    triggered: bool
    upper_holds: bool
    lower_fails: bool
    type2: McEstimate | None
    status: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type2"] = None if self.type2 is None else self.type2.to_dict()
        return d


@dataclass(frozen=True)
class WitnessRow:
    eps: float
    D: int
    tail: float
    rate_sq: float
    type2: McEstimate
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type2"] = self.type2.to_dict()
        return d


@dataclass(frozen=True)
class SandwichReport:
    side: str
    rows: tuple[SandwichRow, ...]
    member_upper: bool
    member_lower: bool
    member_dec_upper: bool
    member_dec_lower: bool
    witness: WitnessRow | None
    passed: bool
    grid: EpsilonGrid

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "grid": list(self.grid.points),
            "member_upper": self.member_upper,
            "member_lower": self.member_lower,
            "member_dec_upper": self.member_dec_upper,
            "member_dec_lower": self.member_dec_lower,
            "rows": [r.to_dict() for r in self.rows],
            "witness": None if self.witness is None else self.witness.to_dict(),
            "passed": self.passed,
        }


def verify_maxiset_sandwich(side: str, sig: Signal, rate: RateSchedule, D: DesignSchedule, spec: OperatorSpectrum,
                            constants: ConstantSet, beta: float, grid: EpsilonGrid, n: int = 100_000,
                            seed: int = 0, workers=None) -> SandwichReport:
    """Cross-check predicate verdicts against simulated detection.

    At each triggered grid eps (energy >= rate^2) where the prefix inequality
    holds with the upper constant, Type-II must be <= beta + 3se; where it
    fails with the lower constant, Type-II must be > beta - 3se. Separately,
    if the signal leaves the decimation-robust set at rate sqrt(2)*rate with
    the lower constant, the decimated witness from that eps must be missed
    (Type-II > beta - 3se).
    """
    side = _check_detector(side)
    if side == "IP":
        up, lo, thr_const = constants.Cmax, constants.Cmin, constants.C1

        def prefix(d):
            return sig.prefix_energy(d)

        def scale(eps, d):
            return eps**2 * math.sqrt(spec.prefix_sum_inv4(d))

        energy = sig.total_energy()
        plain, dec = maxisets.member_F, maxisets.member_F_dec
    else:
        up, lo, thr_const = constants.Cmax_p, constants.Cmin_p, constants.C2

        def prefix(d):
            return sig.prefix_energy(d, weighted_by=spec)

        def scale(eps, d):
            return eps**2 * math.sqrt(d)

        energy = sig.total_energy()
        plain, dec = maxisets.member_G, maxisets.member_G_dec

    rows = []
    ok = True
    for i, eps in enumerate(grid):
        d = D(eps)
        triggered = energy >= rate(eps) ** 2
        pe, sc = prefix(d), scale(eps, d)
        upper_holds = pe > up * sc
        lower_fails = pe <= lo * sc
        est = None
        status = "vacuous" if not triggered else "unchecked"
        if triggered and (upper_holds or lower_fails):
            est = estimate_type2(side, sig, spec, eps, d, thr_const, n, derive_seed(seed, i), workers)
            if upper_holds:
                good = est.p_hat <= beta + SE_BUFFER * est.se
            else:
                good = est.p_hat > beta - SE_BUFFER * est.se
            status = "ok" if good else "violation"
            ok &= good
        rows.append(SandwichRow(eps, d, triggered, upper_holds, lower_fails, est, status))

    witness = None
    if side == "IP":
        found = maxisets.decimation_witness(sig, rate, D, spec, lo, grid)
        if found is not None:
            eps1, wsig = found
            d1 = D(eps1)
            est = estimate_type2("IP", wsig, spec, eps1, d1, thr_const, n, derive_seed(seed, len(grid)), workers)
            good = est.p_hat > beta - SE_BUFFER * est.se
            witness = WitnessRow(eps1, d1, wsig.total_energy(), rate(eps1) ** 2, est, good)
            ok &= good

    return SandwichReport(
        side,
        tuple(rows),
        plain(sig, rate, D, spec, up, grid).member,
        plain(sig, rate, D, spec, lo, grid).member,
        dec(sig, rate, D, spec, up, grid).member,
        dec(sig, rate.times(math.sqrt(2.0)), D, spec, lo, grid).member,
        witness,
        ok,
        grid,
    )


# ---------------------------------------------------------------------------
# Power curves and the IP / DP comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerCurve:
    detector: str
    eps: float
    D: int
    constant: float
    rows: tuple[tuple[float, McEstimate], ...]
    separation_rho: float | None
    flagged: tuple[tuple[float, float], ...] = field(default=())

    CSV_HEADER = ("rho", "p_reject", "se", "n", "seed")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.CSV_HEADER)
        for rho, est in self.rows:
            w.writerow([repr(float(rho)), repr(est.p_hat), repr(est.se), est.n, est.master_seed])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "eps": self.eps,
            "D": self.D,
            "constant": self.constant,
            "rows": [{"rho": rho, **est.to_dict()} for rho, est in self.rows],
            "separation_rho": self.separation_rho,
            "flagged": [list(f) for f in self.flagged],
        }


def power_curve(detector: str, sig_shape: Signal, spec: OperatorSpectrum, eps: float, D: int, constant: float,
                rho_list, n: int, seed: int, beta: float = 0.1, workers=None) -> PowerCurve:
    """Rejection probability of ``rho * sig_shape`` over the energy scales.

    Every rho reuses the same replication streams, so neighbouring points
    share their noise. ``separation_rho`` is the first rho whose estimated
    power reaches 1 - beta.
    """
    d = _check_detector(detector)
    rhos = sorted(float(r) for r in rho_list)
    if not rhos or rhos[0] < 0:
        raise ValueError("rho list must be non-empty and non-negative")
    rows = []
    for rho in rhos:
        rej = simulate_decisions(sig_shape.scaled(rho), spec, eps, D, {d: constant}, n, seed, workers)[d]
        rows.append((rho, McEstimate.from_count(rej, n, check_seed(seed))))
    sep = next((rho for rho, est in rows if est.p_hat >= 1.0 - beta), None)
    flagged = tuple(
        (r1, r2)
        for (r1, e1), (r2, e2) in zip(rows, rows[1:])
        if e1.p_hat - e2.p_hat > 5.0 * (e1.se + e2.se)
    )
    return PowerCurve(d, eps, int(D), constant, tuple(rows), sep, flagged)


def separation_energy(detector: str, sig_shape: Signal, spec: OperatorSpectrum, eps: float, D: int, constant: float,
                      beta: float, n: int, seed: int, steps: int = 30, workers=None) -> float:
    """Bisection (in log rho) for the smallest scale with estimated power >= 1 - beta."""
    d = _check_detector(detector)

    def power(rho):
        return simulate_decisions(sig_shape.scaled(rho), spec, eps, D, {d: constant}, n, seed, workers)[d] / n

    lo, hi = 1e-3, 1.0
    while power(hi) < 1.0 - beta:
        lo, hi = hi, hi * 4.0
        if hi > 1e12:
            raise RuntimeError("power never reaches 1 - beta")
    while power(lo) >= 1.0 - beta:
        lo /= 4.0
        if lo < 1e-12:
            return lo
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if power(mid) >= 1.0 - beta:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class SpikeDuel:
    position: int
    eps: float
    D: int
    sep_ip: float
    sep_dp: float
    rho: float
    power_ip: McEstimate
    power_dp: McEstimate
    winner: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["power_ip"] = self.power_ip.to_dict()
        d["power_dp"] = self.power_dp.to_dict()
        return d


def spike_duel(spec, eps, D, constants: ConstantSet, beta, n, seed, position, workers=None) -> SpikeDuel:
    """Place a unit spike at ``position``, find each detector's separation scale,
    and evaluate both detectors at the geometric midpoint of the two scales."""
    shape = spike(position, 1.0)
    s_ip = separation_energy("IP", shape, spec, eps, D, constants.C1, beta, n, derive_seed(seed, 0), workers=workers)
    s_dp = separation_energy("DP", shape, spec, eps, D, constants.C2, beta, n, derive_seed(seed, 1), workers=workers)
    rho = math.sqrt(s_ip * s_dp)
    counts = simulate_decisions(shape.scaled(rho), spec, eps, D, {"IP": constants.C1, "DP": constants.C2}, n,
                                derive_seed(seed, 2), workers)
    s2 = derive_seed(seed, 2)
    p_ip = McEstimate.from_count(counts["IP"], n, s2)
    p_dp = McEstimate.from_count(counts["DP"], n, s2)
    if p_dp.p_hat >= 1 - beta > p_ip.p_hat:
        winner = "DP"
    elif p_ip.p_hat >= 1 - beta > p_dp.p_hat:
        winner = "IP"
    else:
        winner = "tie"
    return SpikeDuel(position, eps, int(D), s_ip, s_dp, rho, p_ip, p_dp, winner)


@dataclass(frozen=True)
class CompareRow:
    eps: float
    D: int
    r: float
    mu: float
    signal: str
    F_dec: bool
    G_dec: bool
    power_ip: McEstimate
    power_dp: McEstimate

    def to_dict(self) -> dict:
        d = asdict(self)
        d["power_ip"] = self.power_ip.to_dict()
        d["power_dp"] = self.power_dp.to_dict()
        return d


@dataclass(frozen=True)
class CompareReport:
    s: float
    t: float
    rows: tuple[CompareRow, ...]
    verdicts: dict
    duels: tuple[SpikeDuel, ...]
    grid: EpsilonGrid

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "t": self.t,
            "grid": list(self.grid.points),
            "verdicts": self.verdicts,
            "rows": [r.to_dict() for r in self.rows],
            "duels": [d.to_dict() for d in self.duels],
        }


def compare_ip_dp(spec: OperatorSpectrum, s: float, t: float, grid: EpsilonGrid, constants: ConstantSet,
                  n: int, seed: int, beta: float = 0.1, signals: dict | None = None, duel_eps: float | None = None,
                  workers=None) -> CompareReport:
    """Side-by-side view of the two detectors under the minimax calibration.

    D_eps and r_eps follow the minimax schedules for (s, t) and mu = b_{D_eps} r_eps.
    For each candidate signal the decimation-robust predicates (F_dec with r
    and Cmin, G_dec with mu and Cmax_p) are evaluated and both detectors are
    simulated on shared replications at every grid point. Two spike duels
    (spike at k = 1 and at k = D_eps) report which detector reaches power
    1 - beta first at ``duel_eps`` (default: middle grid point).
    """
    D = DesignSchedule.minimax_mip(s, t)
    r = RateSchedule.minimax_ip(s, t)
    mu = maxisets.mu_from_r(r, D, spec)
    if signals is None:
        signals = {
            "dyadic_gamma1": maxisets.dyadic_block_signal(s, 1.0),
            "dyadic_gamma0.5": maxisets.dyadic_block_signal(s, 0.5),
        }
    consts = {"IP": constants.C1, "DP": constants.C2}
    rows = []
    verdicts = {}
    for si, (name, sig) in enumerate(signals.items()):
        f = maxisets.member_F_dec(sig, r, D, spec, constants.Cmin, grid)
        g = maxisets.member_G_dec(sig, mu, D, spec, constants.Cmax_p, grid)
        verdicts[name] = {"F_dec": f.to_dict(), "G_dec": g.to_dict()}
        bad_f = {v.epsilon for v in f.violations}
        bad_g = {v.epsilon for v in g.violations}
        for i, eps in enumerate(grid):
            d = D(eps)
            sd = derive_seed(seed, si, i)
            counts = simulate_decisions(sig, spec, eps, d, consts, n, sd, workers)
            rows.append(CompareRow(eps, d, r(eps), mu(eps), name, eps not in bad_f, eps not in bad_g,
                                   McEstimate.from_count(counts["IP"], n, sd),
                                   McEstimate.from_count(counts["DP"], n, sd)))
    pts = grid.points
    e0 = pts[len(pts) // 2] if duel_eps is None else duel_eps
    d0 = D(e0)
    duels = tuple(
        spike_duel(spec, e0, d0, constants, beta, n, derive_seed(seed, 10_000, pos), pos, workers)
        for pos in sorted({1, d0})
    )
    return CompareReport(s, t, tuple(rows), verdicts, duels, grid)
