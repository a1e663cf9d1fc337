"""Acceptance criteria, one test per criterion.

Each criterion is a function of the worker count that returns a JSON-able
payload with a ``passed`` flag and a one-line ``summary``. Payloads are cached
per worker count so the determinism criterion can compare them byte for byte.

Run standalone with ``python3 tests/test_acceptance.py``.
"""

import json
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

import oracles  # noqa: E402

from maxidetect import maxisets, montecarlo  # noqa: E402
from maxidetect.detectors import (  # noqa: E402
    Chebyshev,
    ConstantTooSmall,
    DetectorConfig,
    ExplicitConstants,
    MonteCarloCalibration,
    c_max,
    c_min,
    calibrate_c1,
    calibrate_c2,
    resolve_constants,
)
from maxidetect.model import (  # noqa: E402
    DEFAULT_GRID,
    DesignSchedule,
    DyadicBlock,
    FiniteSupport,
    OperatorSpectrum,
    PowerDecay,
    RateSchedule,
    spike,
)
from maxidetect.rng import derive_seed  # noqa: E402

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

MASTER_SEED = 20240601
BUFFER = 3.0
SPECTRA = {
    "identity": OperatorSpectrum.identity(),
    "t=0.5": OperatorSpectrum.mildly_ill_posed(0.5),
    "t=1": OperatorSpectrum.mildly_ill_posed(1.0),
}


def _seed(*key):
    return derive_seed(MASTER_SEED, *key)


# ---------------------------------------------------------------------------
# 1. Type-I control
# ---------------------------------------------------------------------------


def criterion_1(workers):
    eps, n, n_cal = 0.1, 100_000, 1_000_000
    rows, ok = [], True
    for ai, alpha in enumerate((0.05, 0.1)):
        for si, (name, spec) in enumerate(SPECTRA.items()):
            for D in (10, 100):
                cheb = math.sqrt(2.0 / alpha)
                cal = MonteCarloCalibration(n_cal, _seed(1, 0, ai, si, D))
                mc = {
                    "IP": calibrate_c1(cal, alpha, spec, D, workers=workers),
                    "DP": calibrate_c2(cal, alpha, D, workers=workers),
                }
                for det in ("IP", "DP"):
                    e_ch = montecarlo.estimate_type1(det, spec, eps, D, cheb, n, _seed(1, 1, ai, si, D), workers)
                    e_mc = montecarlo.estimate_type1(det, spec, eps, D, mc[det], n, _seed(1, 2, ai, si, D), workers)
                    good_ch = e_ch.p_hat <= alpha
                    good_mc = abs(e_mc.p_hat - alpha) <= BUFFER * e_mc.se
                    ok &= good_ch and good_mc
                    rows.append({
                        "alpha": alpha, "spectrum": name, "D": D, "detector": det,
                        "chebyshev": e_ch.to_dict(), "chebyshev_ok": good_ch,
                        "mc_constant": mc[det], "mc": e_mc.to_dict(), "mc_ok": good_mc,
                    })
    worst = max(abs(r["mc"]["p_hat"] - r["alpha"]) / r["mc"]["se"] for r in rows)
    summary = (f"{len(rows)} cases; max Chebyshev p_hat/alpha="
               f"{max(r['chebyshev']['p_hat'] / r['alpha'] for r in rows):.3f}; "
               f"max |p_hat-alpha|/se (MC-calibrated)={worst:.2f}")
    return {"passed": ok, "summary": summary, "rows": rows}


# ---------------------------------------------------------------------------
# 2 / 3. Single-spike bound verification
# ---------------------------------------------------------------------------


def _bounds(workers, which, tag):
    eps, D, beta, n = 0.1, 100, 0.1, 100_000
    fn = montecarlo.verify_prop61 if which == "IP" else montecarlo.verify_prop62
    rows, ok = [], True
    for si, (name, spec) in enumerate(SPECTRA.items()):
        consts = resolve_constants(DetectorConfig(0.05, beta, Chebyshev()), spec, D)
        for ci, case in enumerate(("i", "ii")):
            rep = fn(case, spec, eps, D, consts, beta, 0.05, n, _seed(tag, si, ci), workers=workers)
            ok &= rep.passed
            rows.append({"spectrum": name, **rep.to_dict()})
    summary = "; ".join(f"{r['spectrum']} ({r['case']}) type2={r['estimate']['p_hat']:.4f}" for r in rows)
    return {"passed": ok, "summary": summary, "rows": rows}


def criterion_2(workers):
    return _bounds(workers, "IP", 2)


def criterion_3(workers):
    return _bounds(workers, "DP", 3)


# ---------------------------------------------------------------------------
# 4. Sandwich coherence
# ---------------------------------------------------------------------------


def random_signals(rng, count, rate, grid, with_far_spikes=True):
    """Parametric signals scaled to an energy near r_eps^2 at a random grid eps."""
    out = []
    pts = grid.points
    for i in range(count):
        kind = i % 5 if with_far_spikes else i % 4
        if kind == 0:
            sig = PowerDecay(c=1.0, a=float(rng.uniform(0.6, 2.5)))
        elif kind == 1:
            s = float(rng.uniform(0.1, 1.0))
            g = float(rng.uniform(max(0.3, 0.6 - s), 1.5))
            sig = DyadicBlock(s=s, gamma=g)
        elif kind == 2:
            sig = spike(int(rng.integers(1, 20)), 1.0)
        elif kind == 3:
            sig = FiniteSupport(tuple(rng.normal(size=int(rng.integers(2, 30)))))
        else:
            # mass far out: beyond every D_eps on a coarse part of the grid
            sig = spike(int(rng.integers(30, 400)), 1.0)
        eps = pts[int(rng.integers(0, len(pts)))]
        target = rate(eps) ** 2 * 10.0 ** float(rng.uniform(-1.0, 2.5))
        out.append(sig.scaled(math.sqrt(target / sig.total_energy())))
    return out


def _describe(sig):
    d = {"family": type(sig).__name__, "scale": sig.scale, "zeroed": sig.zeroed}
    for key in ("a", "c", "s", "gamma"):
        if hasattr(sig, key):
            d[key] = getattr(sig, key)
    if isinstance(sig, FiniteSupport):
        d["values"] = list(sig.values)
    return d


def criterion_4(workers):
    s = t = 0.5
    spec = OperatorSpectrum.mildly_ill_posed(t)
    D = DesignSchedule.minimax_mip(s, t)
    r = RateSchedule.minimax_ip(s, t)
    grid = DEFAULT_GRID
    beta = 0.1
    consts = resolve_constants(DetectorConfig(0.05, beta), spec, D, grid)
    rng = np.random.default_rng(_seed(4, 0))
    signals = random_signals(rng, 50, r, grid)
    reports, incoherent, witnesses, witness_fail, checked = [], 0, 0, 0, 0
    for i, sig in enumerate(signals):
        rep = montecarlo.verify_maxiset_sandwich("IP", sig, r, D, spec, consts, beta, grid, 100_000,
                                                 _seed(4, 1, i), workers)
        for row in rep.rows:
            if row.type2 is None:
                continue
            checked += 1
            if row.upper_holds and row.type2.p_hat > beta + BUFFER * row.type2.se:
                incoherent += 1
        if rep.witness is not None:
            witnesses += 1
            witness_fail += not rep.witness.passed
        reports.append({"signal": _describe(sig), "report": rep.to_dict()})
    ok = incoherent == 0 and witness_fail == 0 and witnesses > 0 and all(x["report"]["passed"] for x in reports)
    summary = (f"50 signals, {checked} simulated (signal, eps) cells; member-at-Cmax but undetected: {incoherent}; "
               f"decimation witnesses: {witnesses} ({witness_fail} detected too often)")
    return {"passed": ok, "summary": summary, "constants": consts.as_dict(), "signals": reports}


# ---------------------------------------------------------------------------
# 5. Embedding condition and the decimated-set inclusion
# ---------------------------------------------------------------------------

EMBED_T = (0.5, 1.0, 2.0)


def criterion_5a(workers):
    """Literal clause: the condition holds on k <= 10^6 whenever Cmax_p <= Cmin.

    Checked at Cmax_p = Cmin and Cmax_p = Cmin / 2 (both satisfy the premise).
    """
    rows, ok = [], True
    for t in EMBED_T:
        spec = OperatorSpectrum.mildly_ill_posed(t)
        for ratio in (1.0, 0.5):
            chk = maxisets.check_embedding_condition(spec, 1.0, ratio, 10**6)
            ok &= chk.holds
            rows.append({"t": t, "Cmax_p_over_Cmin": ratio, **chk.to_dict()})
    summary = "; ".join(
        f"t={r['t']} ratio={r['Cmax_p_over_Cmin']}: {'holds' if r['holds'] else 'fails at k=%d' % r['first_violation']}"
        f" (max ratio {r['worst_ratio']:.4f})"
        for r in rows
    )
    return {"passed": ok, "summary": summary, "rows": rows}


def _inclusion_run(spec, t, cmin, cmax_p, rng, count):
    s = 0.5
    D = DesignSchedule.minimax_mip(s, t)
    base = RateSchedule.minimax_ip(s, t)
    grid = DEFAULT_GRID
    need = max(cmin * e**2 * math.sqrt(spec.prefix_sum_inv4(D(e))) / base(e) ** 2 for e in grid)
    r = base.times(math.sqrt(2.0 * need))
    mu = maxisets.mu_from_r(r, D, spec)
    members, counter = 0, []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            sig = FiniteSupport(tuple(rng.normal(size=int(rng.integers(1, 6)))))
        elif kind == 1:
            sig = PowerDecay(c=1.0, a=float(rng.uniform(1.0, 6.0)))
        else:
            sig = DyadicBlock(s=float(rng.uniform(0.5, 3.0)), gamma=float(rng.uniform(0.5, 2.0)))
        eps = grid.points[int(rng.integers(0, len(grid)))]
        sig = sig.scaled(r(eps) * 10.0 ** float(rng.uniform(-2.0, 1.5)) / math.sqrt(sig.total_energy()))
        f = maxisets.member_F_dec(sig, r, D, spec, cmin, grid)
        g = maxisets.member_G_dec(sig, mu, D, spec, cmax_p, grid)
        members += f.member
        if f.member and not g.member:
            counter.append({"signal": _describe(sig), "G_dec": g.to_dict()})
    return members, counter


def criterion_5b(workers):
    """F_dec(r, Cmin) implies G_dec(b_D r, Cmax_p) for 100 random signals per spectrum.

    The inclusion is asserted under constants satisfying the embedding
    condition; the Chebyshev constants (which do not) are reported alongside.
    """
    beta = 0.1
    valid = ExplicitConstants(1e9, 1e-3)
    rows, ok = [], True
    for ti, t in enumerate(EMBED_T):
        spec = OperatorSpectrum.mildly_ill_posed(t)
        good = {"C1": valid.c1, "C2": valid.c2, "Cmin": c_min(valid.c1, beta), "Cmax_p": c_max(valid.c2, beta)}
        emb = maxisets.check_embedding_condition(spec, good["Cmin"], good["Cmax_p"], 10**6)
        members, counter = _inclusion_run(spec, t, good["Cmin"], good["Cmax_p"],
                                          np.random.default_rng(_seed(5, ti)), 100)
        cheb = resolve_constants(DetectorConfig(0.05, beta), spec, 1)
        m2, c2 = _inclusion_run(spec, t, cheb.Cmin, cheb.Cmax_p, np.random.default_rng(_seed(5, ti)), 100)
        ok &= emb.holds and not counter and members > 0
        rows.append({
            "t": t, "constants": good, "embedding_holds": emb.holds, "members": members,
            "counterexamples": counter, "chebyshev_constants": cheb.as_dict(),
            "chebyshev_members": m2, "chebyshev_counterexamples": len(c2),
        })
    summary = "; ".join(
        f"t={r['t']}: embedding {'holds' if r['embedding_holds'] else 'fails'}, {r['members']} members, "
        f"{len(r['counterexamples'])} counterexamples (Chebyshev constants, reported only: {r['chebyshev_counterexamples']} of {r['chebyshev_members']} members)"
        for r in rows
    )
    return {"passed": ok, "summary": summary, "rows": rows}


# ---------------------------------------------------------------------------
# 6. Tail sums against brute force
# ---------------------------------------------------------------------------


def criterion_6(workers):
    rng = np.random.default_rng(_seed(6))
    rows, worst = [], 0.0
    for i in range(20):
        D = int(rng.integers(0, 50_000))
        kind = i % 4
        weight_t = float(rng.uniform(0.0, 1.5)) if i % 2 else None
        spec = None if weight_t is None else OperatorSpectrum.mildly_ill_posed(weight_t)
        extra = 0.0 if weight_t is None else 2.0 * weight_t
        if kind == 0:
            a = float(rng.uniform(0.6, 3.0))
            c = float(rng.uniform(0.1, 5.0))
            sig = PowerDecay(c=c, a=a)
            ref = oracles.power_decay_tail(c, a, D, extra)
        elif kind == 1:
            s = float(rng.uniform(0.05, 2.0))
            g = float(rng.uniform(max(0.1, 0.6 - s), 2.0))
            sig = DyadicBlock(s=s, gamma=g)
            ref = oracles.dyadic_tail(s, g, D, extra)
        elif kind == 2:
            vals = rng.normal(size=int(rng.integers(1, 2000)))
            sig = FiniteSupport(tuple(vals))
            D = int(rng.integers(0, len(vals)))
            w = None if spec is None else spec.values(len(vals))
            ref = oracles.finite_tail(vals, D, w)
        else:
            a = float(rng.uniform(0.55, 0.8))
            sig = PowerDecay(c=1.0, a=a)
            ref = oracles.power_decay_tail(1.0, a, D, extra)
        got = sig.tail_energy(D, spec)
        rel = abs(got - ref) / abs(ref) if ref else abs(got)
        worst = max(worst, rel)
        rows.append({"draw": i, "signal": _describe(sig), "D": D, "weight_t": weight_t,
                     "reference": ref, "value": got, "rel_err": rel})
    return {"passed": worst <= 1e-8, "summary": f"20 draws, max relative error {worst:.3e}", "rows": rows}


# ---------------------------------------------------------------------------
# 7. Constants arithmetic
# ---------------------------------------------------------------------------


def criterion_7(workers):
    cm = c_max(2.0, 0.5)
    beta_back = (2.0 + 4.0 * cm) / (cm - 2.0) ** 2
    cn = c_min(10.0, 0.1)
    try:
        c_min(1.0, 0.1)
        raised = False
    except ConstantTooSmall:
        raised = True
    ok = cm == 12.0 and abs(beta_back - 0.5) <= 1e-9 and abs(cn - 1.5894) <= 5e-4 and raised
    summary = f"c_max(2,0.5)={cm!r}, back-substituted beta={beta_back!r}, c_min(10,0.1)={cn:.6f}, c_min(1,0.1) raises: {raised}"
    return {"passed": ok, "summary": summary, "c_max": cm, "beta_back": beta_back, "c_min": cn, "raised": raised}


# ---------------------------------------------------------------------------
# 8. Besov functional report
# ---------------------------------------------------------------------------


def criterion_8(workers):
    s = t = 0.5
    sig = maxisets.dyadic_block_signal(s, 1.0)
    spec = OperatorSpectrum.mildly_ill_posed(t)
    sup_w, tab_w = maxisets.besov_sup_functional(sig, 2 * (s + t), spec)
    sup_u, tab_u = maxisets.besov_sup_functional(sig, 2 * s)
    Ks = [k for k, _ in tab_w]
    growth = [b / a for (_, a), (_, b) in zip(tab_u, tab_u[1:])]
    ok = (
        Ks == [2**j for j in range(21)]
        and math.isfinite(sup_w)
        and sup_w == max(v for _, v in tab_w)
        and all(math.isfinite(v) and v >= 0 for _, v in tab_w + tab_u)
    )
    summary = (f"weighted sup={sup_w:.6g} at K={max(tab_w, key=lambda kv: kv[1])[0]}; "
               f"unweighted column {tab_u[0][1]:.4g} -> {tab_u[-1][1]:.4g}, "
               f"successive ratios {min(growth):.4f}..{max(growth):.4f}")
    return {
        "passed": ok, "summary": summary, "sup_weighted": sup_w, "sup_unweighted": sup_u,
        "table": [{"K": k, "weighted": w, "unweighted": u} for (k, w), (_, u) in zip(tab_w, tab_u)],
        "unweighted_growth": growth,
    }


CRITERIA = {
    "1": criterion_1,
    "2": criterion_2,
    "3": criterion_3,
    "4": criterion_4,
    "5a": criterion_5a,
    "5b": criterion_5b,
    "6": criterion_6,
    "7": criterion_7,
    "8": criterion_8,
}

_CACHE = {}


def run_criterion(key, workers=1):
    if (key, workers) not in _CACHE:
        _CACHE[key, workers] = CRITERIA[key](workers)
    return _CACHE[key, workers]


def payload_bytes(key, workers):
    return json.dumps(run_criterion(key, workers), sort_keys=True).encode()


def _report(key, payload):
    line = f"criterion {key:<3} {'PASS' if payload['passed'] else 'FAIL'}  {payload['summary']}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return payload["passed"]


def test_criterion_1_type1_control():
    assert _report("1", run_criterion("1"))


def test_criterion_2_inverse_detector_bounds():
    assert _report("2", run_criterion("2"))


def test_criterion_3_direct_detector_bounds():
    assert _report("3", run_criterion("3"))


def test_criterion_4_sandwich_coherence():
    assert _report("4", run_criterion("4"))


def test_criterion_5a_embedding_whenever_cmaxp_le_cmin():
    assert _report("5a", run_criterion("5a"))


def test_criterion_5b_decimated_inclusion():
    assert _report("5b", run_criterion("5b"))


def test_criterion_6_tail_sum_oracle():
    assert _report("6", run_criterion("6"))


def test_criterion_7_constants_arithmetic():
    assert _report("7", run_criterion("7"))


def test_criterion_8_besov_report():
    assert _report("8", run_criterion("8"))


def test_criterion_9_determinism_across_workers():
    mismatches = []
    for key in CRITERIA:
        base = payload_bytes(key, 1)
        for w in (4, 16):
            if payload_bytes(key, w) != base:
                mismatches.append(f"{key}@{w}")
    payload = {
        "passed": not mismatches,
        "summary": f"criteria 1-8 under workers 1, 4, 16: "
                   + ("byte-identical" if not mismatches else f"differ: {', '.join(mismatches)}"),
    }
    assert _report("9", payload)


if __name__ == "__main__":
    results = []
    for key in CRITERIA:
        results.append(_report(key, run_criterion(key)))
    sys.exit(0 if all(results) else 1)
