"""Run configuration: YAML text in, validated RunConfig out."""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .grid_field import VectorGridField
from .mode_field import Cos, ModeField, One, Sin, VectorModeField, X2
from .norms import NormParams, RadiusSchedule, ScheduleError

DRIVERS = ("rk4", "picard")
BOUNDARY_FORMS = ("full-trace", "paper")


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated constraint."""


SCENARIOS: Dict[str, Dict[str, Any]] = {
    "rest": {
        "ubar": {"family": "zero"},
        "v0": {"modes": []},
    },
    "uniform": {
        "ubar": {"family": "uniform", "U": 1.0},
        "v0": {"modes": [{"k": 1, "m": 1, "amp": 0.01, "phase": "sin"}]},
    },
    "uniform-crossflow": {
        "ubar": {"family": "uniform-crossflow", "U": 1.0, "c": 0.3},
        "v0": {"modes": [{"k": 1, "m": 1, "amp": 0.01, "phase": "sin"}]},
    },
    "channel-inflow-shear": {
        "ubar": {"family": "channel-inflow-shear", "U": 1.0, "shear": 0.5, "profile": "linear"},
        "v0": {"modes": [{"k": 1, "m": 1, "amp": 0.01, "phase": "sin"}]},
    },
    "wavy-inflow": {
        "ubar": {"family": "wavy-inflow", "U": 1.0, "c": 0.3, "a": 0.05},
        "v0": {"modes": [{"k": 1, "m": 1, "amp": 0.01, "phase": "sin"},
                         {"k": 2, "m": 2, "amp": 0.005, "phase": "cos"}]},
    },
}

DEFAULTS: Dict[str, Any] = {
    "scenario": "rest",
    "seed": 0,
    "grid": {"K": 8, "P": 32},
    "time": {"dt": 1e-3, "T0": None},
    "schedule": {"tau0": 0.1, "M": 1.0},
    "norms": {"r": 3, "eps": 0.1, "n_max": 8},
    "driver": "rk4",
    "boundary_form": "full-trace",
    "output": {"dir": "out", "norm_every": 1, "balance_every": 0, "checkpoint_every": 0},
    "picard": {"n_iters": 8, "n_nodes": 16, "M_factor": 1.0},
    "blowup_factor": 1e3,
}

_SECTIONS = {k for k, v in DEFAULTS.items() if isinstance(v, dict)}


@dataclass
class RunConfig:
    scenario: str
    ubar: Dict[str, Any]
    v0: Dict[str, Any]
    K: int
    P: int
    dt: float
    T0: float
    params: NormParams
    schedule: RadiusSchedule
    out_dir: str
    driver: str = "rk4"
    boundary_form: str = "full-trace"
    seed: int = 0
    norm_every: int = 1
    balance_every: int = 0
    checkpoint_every: int = 0
    picard: Dict[str, Any] = field(default_factory=dict)
    blowup_factor: float = 1e3
    M_auto: bool = False
    raw: Dict[str, Any] = field(default_factory=dict)

    def echo(self) -> Dict[str, Any]:
        """Fully resolved configuration as plain data."""
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "grid": {"K": self.K, "P": self.P},
            "time": {"dt": self.dt, "T0": self.T0},
            "schedule": {"tau0": self.schedule.tau0, "M": "auto" if self.M_auto else self.schedule.M},
            "norms": {"r": self.params.r, "eps": self.params.eps, "n_max": self.params.n_max},
            "driver": self.driver,
            "boundary_form": self.boundary_form,
            "output": {"dir": self.out_dir, "norm_every": self.norm_every,
                       "balance_every": self.balance_every, "checkpoint_every": self.checkpoint_every},
            "picard": dict(self.picard),
            "blowup_factor": self.blowup_factor,
            "ubar": dict(self.ubar),
            "v0": copy.deepcopy(self.v0),
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.echo(), sort_keys=True)

    @property
    def config_hash(self) -> str:
        # the output location does not change what is computed
        data = self.echo()
        del data["output"]["dir"]
        return hashlib.sha256(yaml.safe_dump(data, sort_keys=True).encode()).hexdigest()[:16]

    def with_schedule(self, schedule: RadiusSchedule) -> "RunConfig":
        c = copy.copy(self)
        c.schedule, c.T0 = schedule, schedule.T0
        c.params = self.params.with_(tau=schedule.tau0)
        return c

    # fields ---------------------------------------------------------------
    def ubar_field(self) -> VectorModeField:
        return build_ubar(self.ubar)

    def v0_mode(self) -> VectorModeField:
        return build_v0(self.v0, self.seed)

    def v0_grid(self) -> VectorGridField:
        return VectorGridField.from_mode(self.v0_mode(), self.K, self.P)


# ---------------------------------------------------------------------------
# field descriptors


def build_ubar(d: Dict[str, Any]) -> VectorModeField:
    fam = d.get("family", "zero")
    allowed = {"zero": set(), "uniform": {"U"}, "uniform-crossflow": {"U", "c"},
               "channel-inflow-shear": {"U", "shear", "profile", "c"},
               "wavy-inflow": {"U", "c", "a"}}
    if fam not in allowed:
        raise ConfigError(f"unknown ubar family {fam!r}; expected one of {sorted(allowed)}")
    extra = set(d) - allowed[fam] - {"family"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} for ubar family {fam!r}")
    U, c = float(d.get("U", 0.0)), float(d.get("c", 0.0))
    base = VectorModeField(ModeField.constant(U), ModeField.constant(c))
    if fam == "zero":
        return VectorModeField.zero()
    if fam in ("uniform", "uniform-crossflow"):
        return base
    if fam == "channel-inflow-shear":
        s = float(d.get("shear", 0.5))
        prof = d.get("profile", "linear")
        if prof == "linear":
            shear = ModeField.mode(0, X2(), s)
        elif prof == "cosine":
            shear = ModeField.mode(0, Cos(1), s)
        else:
            raise ConfigError(f"unknown shear profile {prof!r}; expected 'linear' or 'cosine'")
        u = VectorModeField(base.comp1 + shear, base.comp2)
    else:
        a = float(d.get("a", 0.05))
        u = base + VectorModeField.from_stream(ModeField.sin_x1(1, Cos(1), a))
    if not u.is_divergence_free():
        raise ConfigError(f"ubar family {fam!r} is not divergence-free")
    return u


def build_v0(d: Dict[str, Any], seed: int = 0) -> VectorModeField:
    """Velocity of the stream function sum amp * {sin|cos}(2 pi k x1) sin(m pi x2)."""
    extra = set(d) - {"modes", "random"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} in v0")
    psi = ModeField()
    for i, m in enumerate(d.get("modes", []) or []):
        bad = set(m) - {"k", "m", "amp", "phase"}
        if bad:
            raise ConfigError(f"unknown key(s) {sorted(bad)} in v0 mode {i}")
        k, mm, amp = int(m.get("k", 1)), int(m.get("m", 1)), float(m.get("amp", 0.0))
        if k < 0 or mm < 1:
            raise ConfigError(f"v0 mode {i}: need k >= 0 and m >= 1")
        phase = m.get("phase", "sin")
        if phase == "sin":
            psi = psi + ModeField.sin_x1(k, Sin(mm), amp)
        elif phase == "cos":
            psi = psi + ModeField.cos_x1(k, Sin(mm), amp)
        else:
            raise ConfigError(f"v0 mode {i}: phase must be 'sin' or 'cos'")
    if d.get("random"):
        from .suites import random_stream

        r = dict(d["random"])
        bad = set(r) - {"n_terms", "amp", "k_max", "m_max"}
        if bad:
            raise ConfigError(f"unknown key(s) {sorted(bad)} in v0.random")
        rng = np.random.default_rng(seed)
        psi = psi + random_stream(rng, k_max=int(r.get("k_max", 2)), m_max=int(r.get("m_max", 2)),
                                  n_terms=int(r.get("n_terms", 3)), amp=float(r.get("amp", 0.01)))
    return VectorModeField.from_stream(psi)


# ---------------------------------------------------------------------------


def _merge(base: Dict[str, Any], over: Dict[str, Any], where: str = "") -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown key {where + k!r}")
        if isinstance(base[k], dict) and k in _SECTIONS and not where:
            if not isinstance(v, dict):
                raise ConfigError(f"section {k!r} must be a mapping")
            out[k] = _merge(base[k], v, where=k + ".")
        else:
            out[k] = v
    return out


def parse_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Validate YAML config text; every violation raises ConfigError naming the constraint."""
    try:
        data = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    data = dict(data)
    ubar_d, v0_d = data.pop("ubar", None), data.pop("v0", None)
    cfg = _merge(DEFAULTS, data)
    for k, v in (overrides or {}).items():
        sec, _, key = k.partition(".")
        if key:
            cfg[sec][key] = v
        else:
            cfg[sec] = v
    scen = cfg["scenario"]
    if scen not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scen!r}; expected one of {sorted(SCENARIOS)}")
    ubar = copy.deepcopy(ubar_d if ubar_d is not None else SCENARIOS[scen]["ubar"])
    v0 = copy.deepcopy(v0_d if v0_d is not None else SCENARIOS[scen]["v0"])
    if not isinstance(ubar, dict) or not isinstance(v0, dict):
        raise ConfigError("ubar and v0 must be mappings")
    build_ubar(ubar)

    K, P = cfg["grid"]["K"], cfg["grid"]["P"]
    if not (isinstance(K, int) and K >= 1 and isinstance(P, int) and P >= 8):
        raise ConfigError(f"grid needs integer K >= 1 and P >= 8, got K={K}, P={P}")
    dt = float(cfg["time"]["dt"])
    if not dt > 0:
        raise ConfigError(f"time step must be positive (dt > 0), got {dt}")
    n = cfg["norms"]
    try:
        params = NormParams(r=int(n["r"]), tau=float(cfg["schedule"]["tau0"]),
                            eps=float(n["eps"]), n_max=int(n["n_max"]))
    except ValueError as exc:
        raise ConfigError(f"norm parameters: {exc}") from exc
    if cfg["driver"] not in DRIVERS:
        raise ConfigError(f"driver must be one of {DRIVERS}, got {cfg['driver']!r}")
    if cfg["boundary_form"] not in BOUNDARY_FORMS:
        raise ConfigError(f"boundary_form must be one of {BOUNDARY_FORMS}")

    tau0 = float(cfg["schedule"]["tau0"])
    M = cfg["schedule"]["M"]
    T0 = cfg["time"]["T0"]
    M_auto = M == "auto"
    if M_auto:
        if T0 is not None:
            raise ConfigError("time.T0 must be omitted when schedule.M is 'auto' (T0 = min(1, tau0)/M)")
        M = 1.0
    try:
        M = float(M)
        T0 = min(1.0, tau0) / M if T0 is None else float(T0)
        schedule = RadiusSchedule(tau0, M, T0)
    except ScheduleError as exc:
        raise ConfigError(f"radius schedule: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"schedule: {exc}") from exc

    out = cfg["output"]
    for key in ("norm_every", "balance_every", "checkpoint_every"):
        if int(out[key]) < 0:
            raise ConfigError(f"output.{key} must be >= 0")
    if int(out["norm_every"]) == 0:
        raise ConfigError("output.norm_every must be >= 1")
    pic = dict(cfg["picard"])
    if int(pic["n_iters"]) < 2:
        raise ConfigError("picard.n_iters must be >= 2")
    if int(pic["n_nodes"]) < 3:
        raise ConfigError("picard.n_nodes must be >= 3")
    if not float(cfg["blowup_factor"]) > 1:
        raise ConfigError("blowup_factor must exceed 1")
    return RunConfig(
        scenario=scen, ubar=ubar, v0=v0, K=K, P=P, dt=dt, T0=schedule.T0, params=params,
        schedule=schedule, out_dir=str(out["dir"]), driver=cfg["driver"],
        boundary_form=cfg["boundary_form"], seed=int(cfg["seed"]),
        norm_every=int(out["norm_every"]), balance_every=int(out["balance_every"]),
        checkpoint_every=int(out["checkpoint_every"]), picard=pic,
        blowup_factor=float(cfg["blowup_factor"]), M_auto=M_auto, raw=cfg)


def load_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    text = ""
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text, overrides)


def resolve_auto_schedule(cfg: RunConfig):
    """Fix M = factor * max(1, 12 C0 A) with the measured product constant C0; returns (cfg, A, C0)."""
    from .solver import measured_C0, picard_constant_A, picard_schedule

    v0, ub = cfg.v0_mode(), cfg.ubar_field()
    pc = cfg.params.with_(tau=cfg.schedule.tau0)
    C0 = measured_C0([f for f in (v0, ub) if f.l2_norm() > 0], pc)
    A = picard_constant_A(v0, ub, cfg.schedule, cfg.params)
    if not cfg.M_auto:
        return cfg, A, C0
    s = picard_schedule(cfg.schedule.tau0, A, C0, float(cfg.picard.get("M_factor", 1.0)))
    return cfg.with_schedule(s), A, C0
