"""JSON experiment configuration.

A config is a flat JSON object with an explicit ``schema_version``. Unknown
keys are errors at every level. Model objects (spectrum, signal, schedules,
grid, calibration) are described by small ``{"family": ..., ...}`` objects.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields

from .detectors import Chebyshev, ExplicitConstants, MonteCarloCalibration
from .model import (
    DesignSchedule,
    DyadicBlock,
    EpsilonGrid,
    FiniteSupport,
    OperatorSpectrum,
    PowerDecay,
    RateSchedule,
    Signal,
    spike,
)
from .rng import MAX_SEED

__all__ = ["SCHEMA_VERSION", "ConfigError", "ExperimentConfig", "load_config", "dumps_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# family -> {key: type}; "family" itself is implied
_SPECTRUM = {
    "identity": {},
    "mildly_ill_posed": {"t": float},
    "explicit": {"prefix": list, "tail_exponent": float},
}
_SIGNAL = {
    "zero": {},
    "spike": {"k": int, "value": float},
    "finite": {"values": list},
    "power_decay": {"c": float, "a": float},
    "dyadic_block": {"s": float, "gamma": float},
}
_SIGNAL_COMMON = {"scale": float, "zeroed": int}
_DESIGN = {
    "constant": {"D": int},
    "minimax_mip": {"s": float, "t": float},
    "table": {"table": list},
}
_RATE = {
    "power_law": {"c": float, "e": float},
    "minimax_ip": {"s": float, "t": float},
    "table": {"table": list},
}
_GRID = {
    "geometric": {"start": float, "ratio": float, "n": int},
    "points": {"points": list},
}
_CALIBRATION = {
    "chebyshev": {},
    "monte_carlo": {"n": int, "seed": int},
    "explicit": {"c1": float, "c2": float},
}
_CONSTANT_NAMES = ("C1", "C2", "Cmax", "Cmin", "Cmax_p", "Cmin_p")
DETECTORS = ("IP", "DP", "both")
FORMATS = ("json", "csv", "text")


def _coerce(value, typ, where):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return _plain_list(value, where)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise TypeError(typ)


def _plain_list(value, where):
    out = []
    for i, v in enumerate(value):
        if isinstance(v, list):
            out.append(_plain_list(v, f"{where}[{i}]"))
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}[{i}]: expected a number, got {v!r}")
        else:
            out.append(v)
    return out


def _family(obj, table, where, extra=None, family_key="family"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {obj!r}")
    fam = obj.get(family_key)
    if fam not in table:
        raise ConfigError(f"{where}: {family_key} must be one of {sorted(table)}, got {fam!r}")
    allowed = dict(table[fam])
    allowed.update(extra or {})
    out = {family_key: fam}
    for key, val in obj.items():
        if key == family_key:
            continue
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r} for {family_key} {fam!r}")
        out[key] = _coerce(val, allowed[key], f"{where}.{key}")
    missing = [k for k in table[fam] if k not in out]
    if missing:
        raise ConfigError(f"{where}: missing {missing} for {family_key} {fam!r}")
    return out


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    detector: str = "both"
    spectrum: dict = field(default_factory=lambda: {"family": "mildly_ill_posed", "t": 0.5})
    signal: dict = field(default_factory=lambda: {"family": "zero"})
    design: dict = field(default_factory=lambda: {"family": "minimax_mip", "s": 0.5, "t": 0.5})
    rate: dict = field(default_factory=lambda: {"family": "minimax_ip", "s": 0.5, "t": 0.5})
    mu: object = "auto"
    grid: dict = field(default_factory=lambda: {"family": "geometric", "start": 0.5, "ratio": 0.8, "n": 20})
    alpha: float = 0.05
    beta: float = 0.1
    calibration: dict = field(default_factory=lambda: {"mode": "chebyshev"})
    constants: dict = field(default_factory=dict)
    n: int = 100_000
    master_seed: int = 0
    format: str = "json"
    epsilon: float = 0.1
    rho: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0, 2.0, 4.0])
    margin: float = 0.05
    k_max: int = 1_000_000

    # ------------------------------------------------------------------ io

    @classmethod
    def from_dict(cls, raw) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "schema_version" not in raw:
            raise ConfigError("config needs a schema_version")
        if raw["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {raw['schema_version']!r} (expected {SCHEMA_VERSION})")
        cfg = cls()
        for key, val in raw.items():
            setattr(cfg, key, copy.deepcopy(val))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    def validate(self) -> "ExperimentConfig":
        """Normalize in place and raise ConfigError on anything invalid."""
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        self.spectrum = _family(self.spectrum, _SPECTRUM, "spectrum")
        self.signal = _family(self.signal, _SIGNAL, "signal", _SIGNAL_COMMON)
        self.design = _family(self.design, _DESIGN, "design")
        self.rate = _family(self.rate, _RATE, "rate")
        if self.mu != "auto":
            self.mu = _family(self.mu, _RATE, "mu")
        self.grid = _family(self.grid, _GRID, "grid")
        self.calibration = _family(self.calibration, _CALIBRATION, "calibration", family_key="mode")
        if not isinstance(self.constants, dict):
            raise ConfigError("constants must be an object")
        bad = sorted(set(self.constants) - set(_CONSTANT_NAMES))
        if bad:
            raise ConfigError(f"unknown constant overrides: {bad}")
        self.constants = {k: _coerce(v, float, f"constants.{k}") for k, v in self.constants.items()}
        if any(v <= 0 for v in self.constants.values()):
            raise ConfigError("constant overrides must be positive")
        self.alpha = _coerce(self.alpha, float, "alpha")
        self.beta = _coerce(self.beta, float, "beta")
        self.epsilon = _coerce(self.epsilon, float, "epsilon")
        self.margin = _coerce(self.margin, float, "margin")
        self.n = _coerce(self.n, int, "n")
        self.master_seed = _coerce(self.master_seed, int, "master_seed")
        self.k_max = _coerce(self.k_max, int, "k_max")
        self.rho = [_coerce(r, float, "rho") for r in _coerce(self.rho, list, "rho")]
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        # beta outside (0, 1/2) is only meaningful as an arithmetic check of
        # the constant formulas with explicit C1, C2
        hi = 1.0 if self.calibration["mode"] == "explicit" else 0.5
        if not 0.0 < self.beta < hi:
            raise ConfigError(f"beta must lie in (0, {hi:g}) for calibration {self.calibration['mode']!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0 <= self.master_seed <= MAX_SEED:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if not self.rho or any(r < 0 for r in self.rho):
            raise ConfigError("rho must be a non-empty list of non-negative scales")
        # build every object once so that model-level validation surfaces here
        try:
            self.build_spectrum()
            self.build_signal()
            self.build_design()
            self.build_rate()
            self.build_mu()
            self.build_grid()
            self.build_calibration()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    # ------------------------------------------------------------- builders

    def build_spectrum(self) -> OperatorSpectrum:
        s = self.spectrum
        if s["family"] == "identity":
            return OperatorSpectrum.identity()
        if s["family"] == "mildly_ill_posed":
            return OperatorSpectrum.mildly_ill_posed(s["t"])
        return OperatorSpectrum.explicit(s["prefix"], s.get("tail_exponent", 0.0))

    def build_signal(self) -> Signal:
        s = self.signal
        fam = s["family"]
        if fam == "zero":
            sig = FiniteSupport(())
        elif fam == "spike":
            sig = spike(s["k"], s["value"])
        elif fam == "finite":
            sig = FiniteSupport(tuple(s["values"]))
        elif fam == "power_decay":
            sig = PowerDecay(c=s["c"], a=s["a"])
        else:
            sig = DyadicBlock(s=s["s"], gamma=s["gamma"])
        if "zeroed" in s:
            if s["zeroed"] < 0:
                raise ConfigError("signal.zeroed must be >= 0")
            sig = sig.decimated(s["zeroed"])
        if "scale" in s:
            sig = sig.scaled(s["scale"])
        return sig

    def build_design(self) -> DesignSchedule:
        d = self.design
        if d["family"] == "constant":
            return DesignSchedule.constant(d["D"])
        if d["family"] == "minimax_mip":
            return DesignSchedule.minimax_mip(d["s"], d["t"])
        return DesignSchedule.from_table([tuple(p) for p in d["table"]])

    @staticmethod
    def _rate(d) -> RateSchedule:
        if d["family"] == "power_law":
            return RateSchedule.power_law(d["c"], d["e"])
        if d["family"] == "minimax_ip":
            return RateSchedule.minimax_ip(d["s"], d["t"])
        return RateSchedule.from_table([tuple(p) for p in d["table"]])

    def build_rate(self) -> RateSchedule:
        return self._rate(self.rate)

    def build_mu(self) -> RateSchedule:
        if self.mu == "auto":
            return RateSchedule("spectral", base=self.build_rate(), design=self.build_design(),
                                spectrum=self.build_spectrum())
        return self._rate(self.mu)

    def build_grid(self) -> EpsilonGrid:
        g = self.grid
        if g["family"] == "geometric":
            return EpsilonGrid.geometric(g["start"], g["ratio"], g["n"])
        return EpsilonGrid(tuple(g["points"]))

    def build_calibration(self):
        c = self.calibration
        if c["mode"] == "chebyshev":
            return Chebyshev()
        if c["mode"] == "monte_carlo":
            return MonteCarloCalibration(n=c.get("n", 1_000_000), seed=c.get("seed", 0))
        return ExplicitConstants(c["c1"], c["c2"])

    def detectors(self) -> tuple[str, ...]:
        return ("IP", "DP") if self.detector == "both" else (self.detector,)


def load_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def dumps_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2)
