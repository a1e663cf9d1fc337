"""Command-line runner: ``maxidetect <command> --config cfg.json``.

Exit codes: 0 pass, 1 statistical assertion failed, 2 config error,
3 a Type-II constant is undefined for the configured C1 / beta.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import maxisets, montecarlo
from .config import ConfigError, ExperimentConfig, load_config
from .detectors import ConstantSet, ConstantTooSmall, calibrate_c1, calibrate_c2, c_max, c_min
from .engine import default_workers
from .rng import derive_seed

EXIT_OK, EXIT_STAT, EXIT_CONFIG, EXIT_CONSTANT = 0, 1, 2, 3

VERIFY_TARGETS = ("prop61", "prop62", "sandwich", "embedding", "besov")


class Outcome:
    """Result of a command: a JSON-able payload plus optional CSV rows and text."""

    def __init__(self, result: dict, passed: bool = True, csv_rows=None, csv_text: str | None = None,
                 text: list[str] | None = None, code: int | None = None, constants: dict | None = None):
        self.result = result
        self.constants = constants
        self.passed = passed
        self.csv_rows = csv_rows
        self.csv_text = csv_text
        self.text = text or []
        self.code = code


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


def _design_arg(cfg: ExperimentConfig, single_eps: bool):
    design = cfg.build_design()
    if single_eps:
        return design(cfg.epsilon), None
    return design, cfg.build_grid()


def constant_table(cfg: ExperimentConfig, single_eps: bool = True, workers=None) -> tuple[dict, dict]:
    """Resolved constants and the errors of those that are undefined.

    Overrides in ``cfg.constants`` replace computed values (and mask errors).
    """
    spec = cfg.build_spectrum()
    D, grid = _design_arg(cfg, single_eps)
    mode = cfg.build_calibration()
    over = cfg.constants
    C1 = over.get("C1") or calibrate_c1(mode, cfg.alpha, spec, D, grid, workers)
    C2 = over.get("C2") or calibrate_c2(mode, cfg.alpha, D, grid, workers)
    out = {"C1": C1, "C2": C2}
    errors = {}
    for name, fn, base in (("Cmax", c_max, C1), ("Cmin", c_min, C1), ("Cmax_p", c_max, C2), ("Cmin_p", c_min, C2)):
        if name in over:
            out[name] = over[name]
            continue
        try:
            out[name] = fn(base, cfg.beta)
        except ConstantTooSmall as exc:
            out[name] = None
            errors[name] = str(exc)
    return out, errors


def _constant_set(cfg, single_eps=True, workers=None):
    table, errors = constant_table(cfg, single_eps, workers)
    if errors:
        name = sorted(errors)[0]
        raise ConstantTooSmall(f"{name}: {errors[name]}")
    try:
        return ConstantSet(**table), table
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _ranges(cfg) -> dict:
    grid = cfg.build_grid()
    return {
        "epsilon_grid": grid.describe(),
        "epsilon_points": list(grid.points),
        "k_max": cfg.k_max,
        "replications": cfg.n,
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, workers=None) -> Outcome:
    consts, table = _constant_set(cfg, workers=workers)
    spec, sig, eps = cfg.build_spectrum(), cfg.build_signal(), cfg.epsilon
    D = cfg.build_design()(eps)
    rows, res = [], {"epsilon": eps, "D": D}
    for det in cfg.detectors():
        c = consts.C1 if det == "IP" else consts.C2
        t1 = montecarlo.estimate_type1(det, spec, eps, D, c, cfg.n, derive_seed(cfg.master_seed, 0), workers)
        t2 = montecarlo.estimate_type2(det, sig, spec, eps, D, c, cfg.n, derive_seed(cfg.master_seed, 1), workers)
        res[det] = {"type1": t1.to_dict(), "type2": t2.to_dict()}
        rows += [[det, "type1", t1.p_hat, t1.se, t1.n, t1.master_seed],
                 [det, "type2", t2.p_hat, t2.se, t2.n, t2.master_seed]]
    text = [f"eps={eps:g}  D={D}"] + [
        f"{r[0]:>3} {r[1]:<6} p_hat={r[2]:.6f}  se={r[3]:.6f}  n={r[4]}" for r in rows
    ]
    return Outcome(res, csv_rows=[["detector", "kind", "p_hat", "se", "n", "seed"]] + rows, text=text,
                   constants=table)


def cmd_calibrate(cfg: ExperimentConfig, workers=None) -> Outcome:
    table, errors = constant_table(cfg, workers=workers)
    rows = [["name", "value"]] + [[k, "" if v is None else v] for k, v in table.items()]
    text = [f"{k:<7} {'undefined' if v is None else format(v, '.10g')}" for k, v in table.items()]
    text += [f"error {k}: {v}" for k, v in sorted(errors.items())]
    return Outcome({"constants": table, "errors": errors}, csv_rows=rows, text=text,
                   code=EXIT_CONSTANT if errors else None, constants=table)


def cmd_maxiset(cfg: ExperimentConfig, workers=None) -> Outcome:
    consts, table = _constant_set(cfg, single_eps=False, workers=workers)
    spec, sig, D, grid = cfg.build_spectrum(), cfg.build_signal(), cfg.build_design(), cfg.build_grid()
    r, mu = cfg.build_rate(), cfg.build_mu()
    verdicts = {
        "F_Cmax": maxisets.member_F(sig, r, D, spec, consts.Cmax, grid),
        "F_Cmin": maxisets.member_F(sig, r, D, spec, consts.Cmin, grid),
        "F_dec_Cmax": maxisets.member_F_dec(sig, r, D, spec, consts.Cmax, grid),
        "F_dec_Cmin": maxisets.member_F_dec(sig, r, D, spec, consts.Cmin, grid),
        "G_Cmax_p": maxisets.member_G(sig, mu, D, spec, consts.Cmax_p, grid),
        "G_Cmin_p": maxisets.member_G(sig, mu, D, spec, consts.Cmin_p, grid),
        "G_dec_Cmax_p": maxisets.member_G_dec(sig, mu, D, spec, consts.Cmax_p, grid),
        "G_dec_Cmin_p": maxisets.member_G_dec(sig, mu, D, spec, consts.Cmin_p, grid),
    }
    adm = {
        "F_Cmax": maxisets.admissible_F(r, D, spec, consts.Cmax, grid).admissible,
        "F_Cmin": maxisets.admissible_F(r, D, spec, consts.Cmin, grid).admissible,
        "G_Cmax_p": maxisets.admissible_G(mu, D, consts.Cmax_p, grid).admissible,
        "G_Cmin_p": maxisets.admissible_G(mu, D, consts.Cmin_p, grid).admissible,
    }
    res = {"verdicts": {k: v.to_dict() for k, v in verdicts.items()}, "admissible": adm}
    rows = [["predicate", "member", "violations", "first_violation_eps"]]
    text = []
    for k, v in verdicts.items():
        fv = v.first_violation
        rows.append([k, v.member, len(v.violations), "" if fv is None else fv.epsilon])
        text.append(f"{k:<13} member={str(v.member):<5} violations={len(v.violations)}"
                    + ("" if fv is None else f"  first eps={fv.epsilon:.6g} lhs={fv.lhs:.6g} rhs={fv.rhs:.6g}"))
    text += [f"admissible {k:<9} {v}" for k, v in adm.items()]
    return Outcome(res, csv_rows=rows, text=text, constants=table)


def cmd_power(cfg: ExperimentConfig, workers=None) -> Outcome:
    if cfg.format == "csv" and cfg.detector == "both":
        raise ConfigError("CSV power curves need a single detector (set detector to IP or DP)")
    consts, table = _constant_set(cfg, workers=workers)
    spec, sig, eps = cfg.build_spectrum(), cfg.build_signal(), cfg.epsilon
    D = cfg.build_design()(eps)
    curves = {}
    for det in cfg.detectors():
        c = consts.C1 if det == "IP" else consts.C2
        curves[det] = montecarlo.power_curve(det, sig, spec, eps, D, c, cfg.rho, cfg.n, cfg.master_seed,
                                             cfg.beta, workers)
    passed = not any(pc.flagged for pc in curves.values())
    text = []
    for det, pc in curves.items():
        text.append(f"{det}: eps={eps:g} D={D} separation rho={pc.separation_rho}")
        text += [f"  rho={rho:<10g} p_reject={e.p_hat:.6f} se={e.se:.6f}" for rho, e in pc.rows]
        text += [f"  non-monotone between rho={a:g} and rho={b:g}" for a, b in pc.flagged]
    only = next(iter(curves.values()))
    return Outcome({k: v.to_dict() for k, v in curves.items()}, passed,
                   csv_text=only.to_csv() if len(curves) == 1 else None, text=text, constants=table)


def cmd_compare(cfg: ExperimentConfig, workers=None) -> Outcome:
    if cfg.design["family"] != "minimax_mip":
        raise ConfigError("compare needs a minimax_mip design (it supplies s)")
    spec = cfg.build_spectrum()
    if spec.family == "explicit":
        raise ConfigError("compare needs an identity or mildly_ill_posed spectrum")
    consts, table = _constant_set(cfg, single_eps=False, workers=workers)
    s, t = cfg.design["s"], spec.t
    rep = montecarlo.compare_ip_dp(spec, s, t, cfg.build_grid(), consts, cfg.n, cfg.master_seed, cfg.beta,
                                   workers=workers)
    rows = [["signal", "eps", "D", "F_dec", "G_dec", "power_ip", "power_dp"]]
    text = [f"{'signal':<16} {'eps':>10} {'D':>6} {'F_dec':>6} {'G_dec':>6} {'power_ip':>9} {'power_dp':>9}"]
    for r in rep.rows:
        rows.append([r.signal, r.eps, r.D, r.F_dec, r.G_dec, r.power_ip.p_hat, r.power_dp.p_hat])
        text.append(f"{r.signal:<16} {r.eps:>10.4g} {r.D:>6} {str(r.F_dec):>6} {str(r.G_dec):>6} "
                    f"{r.power_ip.p_hat:>9.4f} {r.power_dp.p_hat:>9.4f}")
    for d in rep.duels:
        text.append(f"spike at k={d.position}: separation rho IP={d.sep_ip:.6g} DP={d.sep_dp:.6g} -> {d.winner}")
    return Outcome(rep.to_dict(), csv_rows=rows, text=text, constants=table)


def _verify_bounds(cfg, workers, which):
    consts, table = _constant_set(cfg, workers=workers)
    spec, eps = cfg.build_spectrum(), cfg.epsilon
    D = cfg.build_design()(eps)
    fn = montecarlo.verify_prop61 if which == "prop61" else montecarlo.verify_prop62
    reps = [fn(case, spec, eps, D, consts, cfg.beta, cfg.margin, cfg.n, derive_seed(cfg.master_seed, i),
               workers=workers) for i, case in enumerate(("i", "ii"))]
    rows = [["case", "energy", "bound", "p_hat", "se", "passed"]]
    text = []
    for r in reps:
        rows.append([r.case, r.energy, r.bound, r.estimate.p_hat, r.estimate.se, r.passed])
        text.append(f"{r.detector} case {r.case:<2} energy={r.energy:.6g} bound={r.bound:.6g} "
                    f"type2={r.estimate.p_hat:.6f} (se {r.estimate.se:.6f}) {'pass' if r.passed else 'FAIL'}")
    return Outcome({"reports": [r.to_dict() for r in reps]}, all(r.passed for r in reps), csv_rows=rows, text=text,
                   constants=table)


def _verify_sandwich(cfg, workers):
    consts, table = _constant_set(cfg, single_eps=False, workers=workers)
    spec, sig, D, grid = cfg.build_spectrum(), cfg.build_signal(), cfg.build_design(), cfg.build_grid()
    reps = []
    for i, det in enumerate(cfg.detectors()):
        rate = cfg.build_rate() if det == "IP" else cfg.build_mu()
        reps.append(montecarlo.verify_maxiset_sandwich(det, sig, rate, D, spec, consts, cfg.beta, grid, cfg.n,
                                                       derive_seed(cfg.master_seed, i), workers))
    rows = [["side", "eps", "D", "triggered", "upper_holds", "lower_fails", "p_hat", "status"]]
    text = []
    for rep in reps:
        text.append(f"{rep.side}: member upper={rep.member_upper} lower={rep.member_lower} "
                    f"dec upper={rep.member_dec_upper} dec lower={rep.member_dec_lower} "
                    f"{'pass' if rep.passed else 'FAIL'}")
        for r in rep.rows:
            p = "" if r.type2 is None else r.type2.p_hat
            rows.append([rep.side, r.eps, r.D, r.triggered, r.upper_holds, r.lower_fails, p, r.status])
            if r.type2 is not None:
                text.append(f"  eps={r.eps:.6g} D={r.D} type2={r.type2.p_hat:.6f} {r.status}")
        if rep.witness is not None:
            w = rep.witness
            text.append(f"  decimation witness eps={w.eps:.6g} type2={w.type2.p_hat:.6f} "
                        f"{'pass' if w.passed else 'FAIL'}")
    return Outcome({"reports": [r.to_dict() for r in reps]}, all(r.passed for r in reps), csv_rows=rows, text=text,
                   constants=table)


def _verify_embedding(cfg, workers):
    consts, table = _constant_set(cfg, workers=workers)
    chk = maxisets.check_embedding_condition(cfg.build_spectrum(), consts.Cmin, consts.Cmax_p, cfg.k_max)
    d = chk.to_dict()
    rows = [["name", "value"]] + [[k, "" if v is None else v] for k, v in d.items()]
    text = [f"embedding condition on k=1..{chk.k_max}: {'holds' if chk.holds else 'fails'}"]
    if not chk.holds:
        text.append(f"  first violation k={chk.first_violation}: lhs={chk.lhs:.6g} > rhs={chk.rhs:.6g}")
    text.append(f"  largest Cmax_p/Cmin ratio that would hold: {chk.worst_ratio:.6g}")
    return Outcome(d, chk.holds, csv_rows=rows, text=text, constants=table)


def _verify_besov(cfg, workers):
    sig, spec = cfg.build_signal(), cfg.build_spectrum()
    if cfg.design["family"] == "minimax_mip":
        s = cfg.design["s"]
    elif cfg.signal["family"] == "dyadic_block":
        s = cfg.signal["s"]
    else:
        raise ConfigError("besov needs s from a minimax_mip design or a dyadic_block signal")
    t = spec.t if spec.family != "explicit" else spec.tail_exponent
    sup_w, tab_w = maxisets.besov_sup_functional(sig, 2 * (s + t), spec)
    sup_u, tab_u = maxisets.besov_sup_functional(sig, 2 * s, None)
    growth = [b / a if a > 0 else math.inf for (_, a), (_, b) in zip(tab_u, tab_u[1:])]
    res = {
        "exponent_weighted": 2 * (s + t),
        "exponent_unweighted": 2 * s,
        "sup_weighted": sup_w,
        "sup_unweighted": sup_u,
        "table": [{"K": k, "weighted": w, "unweighted": u} for (k, w), (_, u) in zip(tab_w, tab_u)],
        "unweighted_growth_ratios": growth,
    }
    rows = [["K", "weighted", "unweighted"]] + [[k, w, u] for (k, w), (_, u) in zip(tab_w, tab_u)]
    text = [f"{'K':>8} {'weighted':>14} {'unweighted':>14}"]
    text += [f"{k:>8} {w:>14.8g} {u:>14.8g}" for (k, w), (_, u) in zip(tab_w, tab_u)]
    text.append(f"sup weighted={sup_w:.8g} sup unweighted={sup_u:.8g} (K = 2^0 .. 2^{len(tab_w) - 1})")
    return Outcome(res, math.isfinite(sup_w), csv_rows=rows, text=text)


def cmd_verify(cfg: ExperimentConfig, which: str, workers=None) -> Outcome:
    if which in ("prop61", "prop62"):
        return _verify_bounds(cfg, workers, which)
    if which == "sandwich":
        return _verify_sandwich(cfg, workers)
    if which == "embedding":
        return _verify_embedding(cfg, workers)
    if which == "besov":
        return _verify_besov(cfg, workers)
    raise ConfigError(f"unknown verification target {which!r}")


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "maxiset": cmd_maxiset,
    "power": cmd_power,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def render(command: str, cfg: ExperimentConfig, out: Outcome, constants: dict | None) -> str:
    if cfg.format == "json":
        payload = {
            "command": command,
            "config": cfg.to_dict(),
            "constants": constants,
            "ranges": _ranges(cfg),
            "passed": out.passed,
            "result": out.result,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if cfg.format == "csv":
        if out.csv_text is not None:
            return out.csv_text
        return _csv(out.csv_rows or [["result"], [json.dumps(out.result, sort_keys=True)]])
    r = _ranges(cfg)
    lines = [f"maxidetect {command}"]
    lines.append(f"quantifier ranges: eps over {r['epsilon_grid']}; k = 1..{r['k_max']}; "
                 f"{r['replications']} replications per estimate")
    if constants:
        lines.append("constants: " + "  ".join(
            f"{k}={'undefined' if v is None else format(v, '.6g')}" for k, v in constants.items()))
    lines += out.text
    if out.code == EXIT_CONSTANT:
        lines.append("result: constant precondition failed")
    else:
        lines.append("result: " + ("pass" if out.passed else "FAIL"))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxidetect", description="Chi-square signal detection experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--n", type=int, help="override replication count")
    common.add_argument("--format", choices=("json", "csv", "text"), help="override output format")
    common.add_argument("--out", help="write output here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("which", choices=VERIFY_TARGETS)
    return p


def _load(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        raw = load_config(text).to_dict()
    else:
        raw = ExperimentConfig().to_dict()
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.n is not None:
        raw["n"] = args.n
    if args.format is not None:
        raw["format"] = args.format
    return ExperimentConfig.from_dict(raw)


def run(argv=None, stdout=None, workers=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        workers = workers if workers is not None else default_workers()
        if args.command == "verify":
            out = cmd_verify(cfg, args.which, workers)
            label = f"verify {args.which}"
        else:
            out = COMMANDS[args.command](cfg, workers)
            label = args.command
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstantTooSmall as exc:
        print(f"constant precondition failed: {exc}", file=sys.stderr)
        return EXIT_CONSTANT
    text = render(label, cfg, out, out.constants)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if out.code is not None:
        if out.code == EXIT_CONSTANT:
            for k, msg in sorted(out.result.get("errors", {}).items()):
                print(f"constant precondition failed: {k}: {msg}", file=sys.stderr)
        return out.code
    return EXIT_OK if out.passed else EXIT_STAT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
